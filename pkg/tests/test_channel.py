import math

import numpy as np
import pytest

from jointalloc.channel import (Allocation, SystemConfig, downlink_to_uplink_power, link_metrics,
                                log10_ber, matched_filter, packet_error, phi_matrix, psi_matrix,
                                sinr_downlink, sinr_uplink, uplink_to_downlink_power)
from jointalloc.errors import ConfigurationError, DualityInfeasibleError

from conftest import GOLDEN_CHANNEL, random_config, random_unit_beams

# frozen from 50-digit mpmath evaluations of the normal approximation
PE_1_15_256 = 0.99999999992383307643
LOG10_BER_5_18_256 = -20.94081903625634502
# frozen from plain complex arithmetic (explicit loops): equal 1.5 W, matched filters
GOLDEN_MRT_SINR = (3.81719987062858, 2.801097036723722)


def one_user(h=1.0, p_max=10.0):
    return SystemConfig(channel=np.array([[h]]), p_max=p_max, blocklength=256,
                        delay_caps=[100.0], weights=[1.0], kinds=("data",))


def brute_uplink(h, q, w):
    k = h.shape[1]
    out = []
    for i in range(k):
        num = q[i] * abs(np.vdot(h[:, i], w[:, i])) ** 2
        den = 1.0 + sum(q[j] * abs(np.vdot(h[:, j], w[:, i])) ** 2 for j in range(k) if j != i)
        out.append(num / den)
    return np.array(out)


# --- configuration -----------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigurationError):
        SystemConfig(channel=np.zeros((2, 1)), p_max=1, blocklength=1, delay_caps=[1],
                     weights=[1], kinds=("data",))
    with pytest.raises(ConfigurationError):
        one_user(p_max=0.0)
    with pytest.raises(ConfigurationError):
        SystemConfig(channel=np.ones((2, 2)), p_max=1, blocklength=1, delay_caps=[1, 1],
                     weights=[0, 0], kinds=("data", "data"))
    with pytest.raises(ConfigurationError):
        SystemConfig(channel=np.ones((2, 2)), p_max=1, blocklength=1, delay_caps=[1],
                     weights=[1, 1], kinds=("data", "data"))


def test_config_counts_and_raw(golden_cfg):
    assert (golden_cfg.n_tx, golden_cfg.n_users) == (2, 2)
    assert golden_cfg.n_data_users == 1 and golden_cfg.n_sem_users == 1
    raw = SystemConfig.from_raw(GOLDEN_CHANNEL * 2.0, [2.0, 2.0], p_max=3, blocklength=256,
                                delay_caps=[1, 1], weights=[1, 1], kinds=("data", "semantic"))
    assert np.allclose(raw.channel, GOLDEN_CHANNEL)
    with pytest.raises(ValueError):
        golden_cfg.channel[0, 0] = 0


def test_allocation_check(golden_cfg):
    w = matched_filter(golden_cfg)
    Allocation([6000, 6000], [1, 1], [1.5, 1.5], w).check(golden_cfg)
    with pytest.raises(ConfigurationError):
        Allocation([6000, 6000], [1, 1], [2, 2], w).check(golden_cfg)
    with pytest.raises(ConfigurationError):
        Allocation([6000, 6000], [1, 1], [1, 1], 2 * w).check(golden_cfg)
    with pytest.raises(ConfigurationError):
        Allocation([8000, 6000], [1, 1], [1, 1], w).check(golden_cfg)


# --- SINR ----------------------------------------------------------------------

def test_single_user_downlink():
    cfg = one_user()
    assert sinr_downlink(cfg, powers=[4.0], beams=np.array([[1.0]]))[0] == pytest.approx(4.0)
    assert sinr_uplink(cfg, [4.0], np.array([[1.0]]))[0] == pytest.approx(4.0)


def test_two_user_hand_evaluation():
    # |h1^H w1|^2 = 1, |h1^H w2|^2 = 0.5
    h = np.array([[1.0, 0.0], [0.0, 1.0]])
    w = np.array([[1.0, math.sqrt(0.5)], [0.0, math.sqrt(0.5)]])
    cfg = SystemConfig(channel=h, p_max=3, blocklength=256, delay_caps=[1, 1], weights=[1, 1],
                       kinds=("data", "data"))
    assert sinr_downlink(cfg, powers=[2.0, 1.0], beams=w)[0] == pytest.approx(4 / 3)


def test_golden_channel_mrt(golden_cfg):
    g = sinr_downlink(golden_cfg, powers=[1.5, 1.5], beams=matched_filter(golden_cfg))
    assert np.allclose(g, GOLDEN_MRT_SINR, rtol=1e-12)


def test_symmetric_uplink():
    cfg = SystemConfig(channel=np.eye(2), p_max=2, blocklength=8, delay_caps=[1, 1],
                       weights=[1, 1], kinds=("data", "data"))
    g = sinr_uplink(cfg, [1.0, 1.0], np.eye(2))
    assert g[0] == g[1]


def test_uplink_brute_force(rng):
    cfg = random_config(rng, 3)
    w = random_unit_beams(rng, 4, 3)
    q = rng.uniform(0.1, 2, 3)
    assert np.allclose(sinr_uplink(cfg, q, w), brute_uplink(cfg.channel, q, w), rtol=1e-12)


def test_dimension_mismatch(golden_cfg):
    with pytest.raises(ConfigurationError):
        sinr_downlink(golden_cfg, powers=[1, 1, 1], beams=matched_filter(golden_cfg))


# --- error model ---------------------------------------------------------------

def test_packet_error_at_capacity():
    assert packet_error(3.0, 2.0, 256) == pytest.approx(0.5, abs=1e-15)


def test_packet_error_large_blocklength():
    assert packet_error(3.0, 1.0, 10**8) == 0.0


def test_packet_error_oracle():
    assert packet_error(1.0, 1.5, 256) == pytest.approx(PE_1_15_256, abs=1e-12)


def test_zero_sinr_degenerate(golden_cfg):
    assert packet_error(0.0, 1.0, 256) == 1.0
    assert log10_ber(0.0, 1.0, 256) == pytest.approx(-math.log10(256))
    lm = link_metrics(golden_cfg, [0.0, 2.0], [1.0, 1.0])
    assert lm.degenerate.tolist() == [True, False]


def test_log10_ber_at_capacity():
    assert log10_ber(3.0, 2.0, 256) == pytest.approx(math.log10(0.5 / 512), abs=1e-12)
    assert log10_ber(3.0, 2.0, 4096) == pytest.approx(math.log10(0.5 / 8192), abs=1e-12)


def test_log10_ber_oracle():
    assert log10_ber(5.0, 1.8, 256) == pytest.approx(LOG10_BER_5_18_256, rel=1e-10)


@pytest.mark.parametrize("rc,L", [(1.0, 256), (1.8, 4096), (2.0, 256)])
def test_log10_ber_matches_packet_error(rc, L):
    for g in np.logspace(-1, 2, 60):
        pe = packet_error(g, rc, L)
        if pe > 1e-300:
            assert 10 ** log10_ber(g, rc, L) * rc * L == pytest.approx(pe, rel=1e-9)


def test_log10_ber_never_increases():
    # ties occur only where Q(x) rounds to 1 in double precision
    g = np.logspace(-2, 4, 1000)
    for rc in (1.0, 1.8, 2.0):
        for L in (256, 4096):
            b = np.array([log10_ber(x, rc, L) for x in g])
            assert np.all(np.diff(b) <= 0)


def test_log10_ber_strict_when_resolvable():
    g = np.logspace(-2, 4, 1000)
    for rc in (1.0, 1.8, 2.0):
        for L in (256, 4096):
            pe = np.array([packet_error(x, rc, L) for x in g])
            b = np.array([log10_ber(x, rc, L) for x in g])
            resolvable = pe[:-1] < 1.0 - 1e-12
            assert np.all(np.diff(b)[resolvable] < 0)


def test_input_validation():
    with pytest.raises(ValueError):
        packet_error(1.0, 0.0, 256)
    with pytest.raises(ValueError):
        packet_error(-1.0, 1.0, 256)


# --- duality -------------------------------------------------------------------

def test_single_user_duality():
    cfg = one_user(h=0.7)
    w = np.array([[1.0]])
    assert uplink_to_downlink_power(cfg, w, [3.0])[0] == pytest.approx(3.0)
    psi = psi_matrix(cfg, w, [2.0])
    assert psi[0, 0] == pytest.approx(0.49 / 2.0)
    assert 1 / psi[0, 0] == pytest.approx(2.0 / 0.49)


def test_psi_phi_solutions(rng):
    cfg = random_config(rng, 3)
    w = random_unit_beams(rng, 4, 3)
    q = rng.uniform(0.2, 1.0, 3)
    gu = sinr_uplink(cfg, q, w)
    p = np.linalg.solve(psi_matrix(cfg, w, gu), np.ones(3))
    assert np.allclose(sinr_downlink(cfg, powers=p, beams=w), gu, rtol=1e-9)
    gd = sinr_downlink(cfg, powers=p, beams=w)
    q2 = np.linalg.solve(phi_matrix(cfg, w, gd), np.ones(3))
    assert np.allclose(q2, q, rtol=1e-9)


def test_golden_channel_duality(golden_cfg):
    from jointalloc.power_beam import mmse_beam
    q = np.array([1.5, 1.5])
    w = mmse_beam(golden_cfg, q)
    p = uplink_to_downlink_power(golden_cfg, w, q)
    assert np.allclose(sinr_downlink(golden_cfg, powers=p, beams=w),
                       sinr_uplink(golden_cfg, q, w), rtol=1e-10)
    assert np.allclose(downlink_to_uplink_power(golden_cfg, w, p), q, atol=1e-8)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_duality_random(rng, k):
    for _ in range(30):
        cfg = random_config(rng, k)
        w = random_unit_beams(rng, 4, k)
        q = rng.uniform(0.05, 2.0, k)
        try:
            p = uplink_to_downlink_power(cfg, w, q)
        except DualityInfeasibleError:
            continue
        assert p.sum() == pytest.approx(q.sum(), rel=1e-9)
        assert np.allclose(sinr_downlink(cfg, powers=p, beams=w), sinr_uplink(cfg, q, w), rtol=1e-8)
        assert np.max(np.abs(downlink_to_uplink_power(cfg, w, p) - q)) <= 1e-8


def test_zero_power_user_gets_zero():
    cfg = SystemConfig(channel=np.eye(2), p_max=2, blocklength=8, delay_caps=[1, 1],
                       weights=[1, 1], kinds=("data", "data"))
    p = uplink_to_downlink_power(cfg, np.eye(2), [0.0, 1.0])
    assert p[0] == 0.0 and p[1] == pytest.approx(1.0)


def test_duality_errors(golden_cfg):
    w = matched_filter(golden_cfg)
    with pytest.raises(DualityInfeasibleError):
        uplink_to_downlink_power(golden_cfg, w, [-1.0, 1.0])
    with pytest.raises(DualityInfeasibleError):
        psi_matrix(golden_cfg, w, [0.0, 1.0])
