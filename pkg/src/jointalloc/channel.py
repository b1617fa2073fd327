"""Downlink/uplink SINR, finite-blocklength error model and duality transforms.

Channels are stored pre-normalised, ``hbar_i = h_i / sigma_i**2``, so every
receiver sees unit noise power.  Matrices of effective gains are indexed as
``G[k, l] = |hbar_k^H w_l|**2`` (user ``k``'s channel seen through beam ``l``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, DualityInfeasibleError
from .numerics import log_q, q_function

LOG2E = math.log2(math.e)
LN10 = math.log(10.0)

DATA = "data"
SEMANTIC = "semantic"
KINDS = (DATA, SEMANTIC)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemConfig:
    """Static description of the multi-user MISO downlink.

    ``channel`` is ``n_tx x K`` with one normalised channel vector per column.
    ``kinds`` gives each user's task kind (``"data"`` or ``"semantic"``).
    Weights may be zero for individual users (used by weight sweeps) as long
    as at least one is positive.
    """

    channel: np.ndarray
    p_max: float
    blocklength: int
    delay_caps: np.ndarray
    weights: np.ndarray
    kinds: tuple[str, ...]

    def __post_init__(self):
        h = np.asarray(self.channel, dtype=complex)
        if h.ndim != 2:
            raise ConfigurationError("channel must be an n_tx x K matrix")
        k = h.shape[1]
        if k < 1:
            raise ConfigurationError("at least one user is required")
        if np.any(np.linalg.norm(h, axis=0) == 0.0):
            raise ConfigurationError("every channel column must be nonzero")
        caps = np.asarray(self.delay_caps, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        kinds = tuple(self.kinds)
        if caps.size != k or w.size != k or len(kinds) != k:
            raise ConfigurationError(
                f"{k} users in channel but {caps.size} delay caps, "
                f"{w.size} weights, {len(kinds)} kinds")
        if not self.p_max > 0:
            raise ConfigurationError("p_max must be positive")
        if int(self.blocklength) < 1 or int(self.blocklength) != self.blocklength:
            raise ConfigurationError("blocklength must be a positive integer")
        if np.any(caps <= 0):
            raise ConfigurationError("delay caps must be positive")
        if np.any(w < 0) or not np.any(w > 0):
            raise ConfigurationError("weights must be nonnegative with a positive entry")
        bad = [kd for kd in kinds if kd not in KINDS]
        if bad:
            raise ConfigurationError(f"unknown user kinds {bad}")
        object.__setattr__(self, "channel", _frozen(h))
        object.__setattr__(self, "delay_caps", _frozen(caps))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "p_max", float(self.p_max))
        object.__setattr__(self, "blocklength", int(self.blocklength))

    @classmethod
    def from_raw(cls, channel, noise_vars, **kwargs) -> "SystemConfig":
        """Build a config from unnormalised channels and per-user noise variances."""
        h = np.asarray(channel, dtype=complex)
        nv = np.asarray(noise_vars, dtype=float).reshape(-1)
        if np.any(nv <= 0):
            raise ConfigurationError("noise variances must be positive")
        return cls(channel=h / nv[None, :], **kwargs)

    @property
    def n_tx(self) -> int:
        return self.channel.shape[0]

    @property
    def n_users(self) -> int:
        return self.channel.shape[1]

    @property
    def n_data_users(self) -> int:
        return sum(k == DATA for k in self.kinds)

    @property
    def n_sem_users(self) -> int:
        return sum(k == SEMANTIC for k in self.kinds)

    def replace(self, **changes) -> "SystemConfig":
        fields = dict(channel=self.channel, p_max=self.p_max,
                      blocklength=self.blocklength, delay_caps=self.delay_caps,
                      weights=self.weights, kinds=self.kinds)
        fields.update(changes)
        return SystemConfig(**fields)


@dataclass(frozen=True)
class Allocation:
    """Decision variables: per-user rates, powers and unit beams (columns)."""

    source_rates: np.ndarray
    channel_rates: np.ndarray
    powers: np.ndarray
    beams: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "source_rates", _frozen(np.asarray(self.source_rates, float)))
        object.__setattr__(self, "channel_rates", _frozen(np.asarray(self.channel_rates, float)))
        object.__setattr__(self, "powers", _frozen(np.asarray(self.powers, float)))
        object.__setattr__(self, "beams", _frozen(np.asarray(self.beams, complex)))

    def check(self, cfg: SystemConfig, tol: float = 1e-9) -> None:
        """Raise :class:`ConfigurationError` if any allocation invariant fails."""
        _check_dims(cfg, self.powers, self.beams)
        for name in ("source_rates", "channel_rates"):
            if getattr(self, name).shape != (cfg.n_users,):
                raise ConfigurationError(f"{name} must have one entry per user")
        if np.any(self.powers < -tol) or self.powers.sum() > cfg.p_max * (1 + tol) + tol:
            raise ConfigurationError("powers violate the budget")
        if np.any(np.abs(np.linalg.norm(self.beams, axis=0) - 1.0) > tol):
            raise ConfigurationError("beams must be unit norm")
        if np.any(self.source_rates <= 0) or np.any(self.channel_rates <= 0):
            raise ConfigurationError("rates must be positive")
        ratio = self.source_rates / self.channel_rates
        if np.any(ratio > cfg.delay_caps * (1 + tol)):
            raise ConfigurationError("delay constraint R_s/R_c <= T violated")


@dataclass(frozen=True)
class LinkMetrics:
    sinr: np.ndarray
    packet_error: np.ndarray
    log10_ber: np.ndarray
    distortion: np.ndarray
    degenerate: np.ndarray = field(default=None)


def _check_dims(cfg: SystemConfig, powers, beams) -> None:
    powers = np.asarray(powers)
    beams = np.asarray(beams)
    if powers.shape != (cfg.n_users,):
        raise ConfigurationError(
            f"expected {cfg.n_users} powers, got shape {powers.shape}")
    if beams.shape != (cfg.n_tx, cfg.n_users):
        raise ConfigurationError(
            f"expected beams of shape {(cfg.n_tx, cfg.n_users)}, got {beams.shape}")


def gain_matrix(channel: np.ndarray, beams: np.ndarray) -> np.ndarray:
    """``G[k, l] = |h_k^H w_l|**2``."""
    return np.abs(np.asarray(channel).conj().T @ np.asarray(beams)) ** 2


def matched_filter(cfg: SystemConfig) -> np.ndarray:
    return cfg.channel / np.linalg.norm(cfg.channel, axis=0)


def _downlink(gains: np.ndarray, p: np.ndarray) -> np.ndarray:
    signal = np.diag(gains) * p
    interference = gains @ p - signal
    return signal / (interference + 1.0)


def _uplink(gains: np.ndarray, q: np.ndarray) -> np.ndarray:
    signal = np.diag(gains) * q
    interference = gains.T @ q - signal
    return signal / (interference + 1.0)


def sinr_downlink(cfg: SystemConfig, alloc: Allocation | None = None, *,
                  powers=None, beams=None) -> np.ndarray:
    """Downlink SINR of every user under superposition broadcasting.

    Either pass an :class:`Allocation` or ``powers=`` and ``beams=`` directly.
    """
    if alloc is not None:
        powers, beams = alloc.powers, alloc.beams
    powers = np.asarray(powers, dtype=float)
    _check_dims(cfg, powers, beams)
    return _downlink(gain_matrix(cfg.channel, beams), powers)


def sinr_uplink(cfg: SystemConfig, q, beams_u) -> np.ndarray:
    """Virtual-uplink SINR; user ``i`` is interfered by ``q_j |h_j^H w_i|^2``."""
    q = np.asarray(q, dtype=float)
    _check_dims(cfg, q, beams_u)
    return _uplink(gain_matrix(cfg.channel, beams_u), q)


# ---------------------------------------------------------------------------
# finite blocklength error model


def dispersion_scale(gamma: float) -> float:
    """``sqrt(1 - 1/(1+gamma)^2) * log2(e)``, the channel dispersion root."""
    return math.sqrt(1.0 - 1.0 / (1.0 + gamma) ** 2) * LOG2E


def q_argument(gamma: float, r_c: float, blocklength: int) -> float:
    """Argument of ``Q`` in the normal approximation; ``-inf`` when ``gamma == 0``."""
    gamma = float(gamma)
    if r_c <= 0:
        raise ValueError("channel rate must be positive")
    if gamma < 0:
        raise ValueError("SINR must be nonnegative")
    if gamma == 0.0:
        return -math.inf
    num = math.sqrt(blocklength) * (math.log2(1.0 + gamma) - r_c)
    return num / dispersion_scale(gamma)


def packet_error(gamma: float, r_c: float, blocklength: int) -> float:
    """Average packet error probability of an ``(r_c * L, L)`` random code."""
    x = q_argument(gamma, r_c, blocklength)
    if x == -math.inf:
        return 1.0
    return q_function(x)


def log10_ber(gamma: float, r_c: float, blocklength: int) -> float:
    """Base-10 log of the bit error rate: packet error spread over ``r_c * L`` bits."""
    prefix = -math.log10(r_c * blocklength)
    x = q_argument(gamma, r_c, blocklength)
    if x == -math.inf:
        return prefix
    return prefix + log_q(x) / LN10


# ---------------------------------------------------------------------------
# uplink-downlink duality


def psi_matrix(cfg: SystemConfig, beams_u, gamma_u) -> np.ndarray:
    """Matrix whose inverse maps uplink SINR targets to downlink powers.

    Diagonal ``G_kk / gamma_k``, off-diagonal ``-G_kl``; ``p = Psi^{-1} 1``.
    """
    gains = gain_matrix(cfg.channel, beams_u)
    return _duality_matrix(gains, np.asarray(gamma_u, dtype=float))


def phi_matrix(cfg: SystemConfig, beams, gamma) -> np.ndarray:
    """Matrix whose inverse maps downlink SINR targets to uplink powers.

    Diagonal ``G_kk / gamma_k``, off-diagonal ``-G_lk``; ``q = Phi^{-1} 1``.
    """
    gains = gain_matrix(cfg.channel, beams)
    return _duality_matrix(gains.T, np.asarray(gamma, dtype=float))


def _duality_matrix(gains: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    if np.any(gamma <= 0):
        raise DualityInfeasibleError("duality matrix needs strictly positive SINRs")
    m = -np.array(gains, dtype=float)
    np.fill_diagonal(m, np.diag(gains) / gamma)
    return m


def _solve_powers(gains: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    # users with zero SINR need (and get) zero power; solve on the rest
    out = np.zeros(gamma.size)
    active = gamma > 0
    if not np.any(active):
        return out
    sub = _duality_matrix(gains[np.ix_(active, active)], gamma[active])
    try:
        lu = scipy.linalg.lu_factor(sub, check_finite=True)
        sol = scipy.linalg.lu_solve(lu, np.ones(sub.shape[0]))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DualityInfeasibleError(f"singular duality matrix: {exc}") from exc
    if np.linalg.cond(sub) > 1e14 or not np.all(np.isfinite(sol)):
        raise DualityInfeasibleError("duality matrix is numerically singular")
    scale = max(1.0, float(np.max(np.abs(sol))))
    if np.any(sol < -1e-12 * scale):
        raise DualityInfeasibleError(f"negative power in duality solution: {sol}")
    out[active] = np.maximum(sol, 0.0)
    return out


def uplink_to_downlink_power(cfg: SystemConfig, beams_u, q) -> np.ndarray:
    """Downlink powers reproducing the uplink SINRs of ``(q, beams_u)``."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise DualityInfeasibleError("uplink powers must be nonnegative")
    gains = gain_matrix(cfg.channel, beams_u)
    gamma_u = _uplink(gains, q)
    return _solve_powers(gains, gamma_u)


def downlink_to_uplink_power(cfg: SystemConfig, beams, p) -> np.ndarray:
    """Uplink powers reproducing the downlink SINRs of ``(p, beams)``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise DualityInfeasibleError("downlink powers must be nonnegative")
    gains = gain_matrix(cfg.channel, beams)
    gamma = _downlink(gains, p)
    return _solve_powers(gains.T, gamma)


def link_metrics(cfg: SystemConfig, sinr: Sequence[float], channel_rates: Sequence[float],
                 distortion=None) -> LinkMetrics:
    """Packet error and log-BER for each user at the given SINRs."""
    sinr = np.asarray(sinr, dtype=float)
    rc = np.asarray(channel_rates, dtype=float)
    pe = np.array([packet_error(g, r, cfg.blocklength) for g, r in zip(sinr, rc)])
    lb = np.array([log10_ber(g, r, cfg.blocklength) for g, r in zip(sinr, rc)])
    dist = np.full(sinr.size, np.nan) if distortion is None else np.asarray(distortion, float)
    return LinkMetrics(sinr=sinr, packet_error=pe, log10_ber=lb, distortion=dist,
                       degenerate=sinr <= 0)
