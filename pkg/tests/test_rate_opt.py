import numpy as np
import pytest

from jointalloc.channel import log10_ber
from jointalloc.distortion import e2e_distortion, interpolate, evaluate
from jointalloc.rate_opt import (RateSolution, objective_at, optimize_rate,
                                 optimize_rate_multistart, subgradient_at)

from conftest import grid_objective, unimodal_rate_instances

CAP = 0.0356 * 196608


def test_objective_examples(data_table):
    lo = data_table.rows[0]
    assert objective_at(data_table, 1e9, CAP, 256, lo.rate) == pytest.approx(lo.floor, abs=1e-12)
    hi = data_table.rows[-1]
    sat = objective_at(data_table, 0.01, CAP, 256, hi.rate)
    assert sat == pytest.approx(hi.floor + hi.span, abs=1e-3)
    r = 0.3 * data_table.rows[4].rate + 0.7 * data_table.rows[5].rate
    manual = evaluate(interpolate(data_table, r), log10_ber(3.0, r / CAP, 256))
    assert objective_at(data_table, 3.0, CAP, 256, r) == manual


def _fd(table, g, cap, L, r, h):
    return (objective_at(table, g, cap, L, r + h) - objective_at(table, g, cap, L, r - h)) / (2 * h)


def test_subgradient_matches_central_differences(sem_table):
    rates = sem_table.rates
    for g in (2.0, 4.0, 8.0):
        for n in range(len(rates) - 1):
            r = rates[n] + 0.37 * (rates[n + 1] - rates[n])
            h = 1e-6 * r
            fd = _fd(sem_table, g, CAP, 256, r, h)
            d = subgradient_at(sem_table, g, CAP, 256, r)
            assert d == pytest.approx(fd, rel=1e-5, abs=1e-12)


def test_kink_rule(data_table):
    rates = data_table.rates
    g, r = 4.0, rates[5]
    h = 1e-6 * r
    f = lambda x: objective_at(data_table, g, CAP, 256, x)
    left = (f(r) - f(r - h)) / h
    right = (f(r + h) - f(r)) / h
    assert subgradient_at(data_table, g, CAP, 256, r) == pytest.approx(0.5 * (left + right), rel=1e-4)
    r0 = rates[0]
    right0 = (f(r0 + 1e-6 * r0) - f(r0)) / (1e-6 * r0)
    assert subgradient_at(data_table, g, CAP, 256, r0) == pytest.approx(right0, rel=1e-4)
    rn = rates[-1]
    leftn = (f(rn) - f(rn - 1e-6 * rn)) / (1e-6 * rn)
    assert subgradient_at(data_table, g, CAP, 256, rn) == pytest.approx(leftn, rel=1e-4)


def test_tiny_sinr_picks_lowest_rate(data_table):
    sol = optimize_rate(data_table, 1e-3, CAP, 256)
    assert sol.source_rate == data_table.r_min


def test_huge_sinr_picks_highest_rate(sem_table):
    sol = optimize_rate(sem_table, 1e9, CAP, 256)
    assert sol.source_rate == pytest.approx(sem_table.r_max)


def test_solution_invariants(data_table):
    sol = optimize_rate(data_table, 4.0, CAP, 256)
    assert isinstance(sol, RateSolution)
    assert sol.channel_rate == sol.source_rate / CAP
    assert data_table.r_min <= sol.source_rate <= data_table.r_max
    objs = [o for _, o in sol.trajectory]
    assert all(b <= a for a, b in zip(objs, objs[1:]))
    assert all(data_table.r_min <= r <= data_table.r_max for r, _ in sol.trajectory)
    assert sol.objective == min(objs)


def test_deterministic(sem_table):
    a = optimize_rate(sem_table, 3.0, CAP, 1024)
    b = optimize_rate(sem_table, 3.0, CAP, 1024)
    assert a.trajectory == b.trajectory


def test_grid_oracle():
    for table, g, cap, L in unimodal_rate_instances(15, seed=11):
        grid, vals = grid_objective(table, g, cap, L)
        sol = optimize_rate(table, g, cap, L)
        assert sol.objective <= vals.min() + 1e-4


def test_multistart_no_worse(sem_table):
    for g in (1.5, 3.0, 6.0):
        single = optimize_rate(sem_table, g, CAP, 256)
        multi = optimize_rate_multistart(sem_table, g, CAP, 256)
        assert multi.objective <= single.objective + 1e-15


def test_start_is_clamped(data_table):
    sol = optimize_rate(data_table, 3.0, CAP, 256, start=1.0, max_iter=1)
    assert sol.trajectory[0][0] == data_table.r_min
