"""Per-user source/channel rate selection for fixed power and beams.

With the delay constraint active (``R_c = R_s / T``) the distortion becomes a
function of the source rate alone.  It is piecewise smooth with kinks at the
tabulated rates, so it is minimised by projected subgradient descent with a
backtracking line search, starting from the lowest tabulated rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .channel import LN10, dispersion_scale, log10_ber
from .distortion import DistortionTable, e2e_distortion, segment_slopes
from .numerics import log_q_derivative

ARMIJO = 0.3
SHRINK = 0.5
INIT_STEP_FRACTION = 0.05
EPSILON = 1e-5
MAX_ITER = 500


@dataclass(frozen=True)
class RateSolution:
    source_rate: float
    channel_rate: float
    objective: float
    iterations: int
    trajectory: list = field(default_factory=list, compare=False)


def objective_at(table: DistortionTable, gamma: float, delay_cap: float,
                 blocklength: int, r_s: float) -> float:
    """E2E distortion at source rate ``r_s`` with ``R_c = r_s / delay_cap``."""
    return e2e_distortion(table, r_s, log10_ber(gamma, r_s / delay_cap, blocklength))


def _segment_derivative(table: DistortionTable, seg: int, gamma: float, delay_cap: float,
                        blocklength: int, r_s: float) -> float:
    lo = table.rows[seg]
    dp = segment_slopes(table, seg)
    floor, span, slope, mid = lo.params() + (r_s - lo.rate) * dp
    r_c = r_s / delay_cap
    rho = log10_ber(gamma, r_c, blocklength)
    # d rho / d r_s through the 1/(R_c L) prefix and the Q argument
    drho = -1.0 / (r_s * LN10)
    if gamma > 0:
        x = math.sqrt(blocklength) * (math.log2(1.0 + gamma) - r_c) / dispersion_scale(gamma)
        dx = -math.sqrt(blocklength) / (delay_cap * dispersion_scale(gamma))
        drho += log_q_derivative(x) * dx / LN10
    sig = float(expit(slope * (rho - mid)))
    dsig = sig * (1.0 - sig)
    return (dp[0] + dp[1] * sig
            + span * dsig * (dp[2] * (rho - mid) + slope * (drho - dp[3])))


def subgradient_at(table: DistortionTable, gamma: float, delay_cap: float,
                   blocklength: int, r_s: float) -> float:
    """Derivative of :func:`objective_at`, with the kink rule at tabulated rates.

    End rates use the one-sided derivative pointing into the table.  Interior
    tabulated rates use the mean of the left and right derivatives.
    """
    rates = table.rates
    nseg = len(rates) - 1
    hit = np.nonzero(np.isclose(rates, r_s, rtol=1e-12, atol=0.0))[0]
    args = (gamma, delay_cap, blocklength, r_s)
    if hit.size == 0:
        seg = int(np.searchsorted(rates, r_s, side="right")) - 1
        seg = min(max(seg, 0), nseg - 1)
        return _segment_derivative(table, seg, *args)
    n = int(hit[0])
    if n == 0:
        return _segment_derivative(table, 0, *args)
    if n == nseg:
        return _segment_derivative(table, nseg - 1, *args)
    left = _segment_derivative(table, n - 1, *args)
    right = _segment_derivative(table, n, *args)
    return 0.5 * (left + right)


def optimize_rate(table: DistortionTable, gamma: float, delay_cap: float, blocklength: int,
                  *, start: float | None = None, epsilon: float = EPSILON,
                  max_iter: int = MAX_ITER) -> RateSolution:
    """Projected subgradient descent on the source rate.

    Starts from the lowest tabulated rate unless ``start`` is given, and
    returns the best point visited.
    """
    lo, hi = table.r_min, table.r_max
    step0 = INIT_STEP_FRACTION * (hi - lo)
    r = lo if start is None else float(np.clip(start, lo, hi))

    def f(x):
        return objective_at(table, gamma, delay_cap, blocklength, x)

    fr = f(r)
    traj = [(r, fr)]
    best_r, best_f = r, fr
    it = 0
    for it in range(1, max_iter + 1):
        d = subgradient_at(table, gamma, delay_cap, blocklength, r)
        if d == 0.0 or not math.isfinite(d):
            break
        direction = -math.copysign(1.0, d)
        s = step0
        accepted = False
        while s > 1e-12 * (hi - lo):
            cand = min(max(r + direction * s, lo), hi)
            moved = abs(cand - r)
            if moved == 0.0:
                break
            fc = f(cand)
            if fc <= fr - ARMIJO * abs(d) * moved:
                accepted = True
                break
            s *= SHRINK
        if not accepted:
            break
        decrease = fr - fc
        r, fr = cand, fc
        traj.append((r, fr))
        if fr < best_f:
            best_r, best_f = r, fr
        if decrease <= epsilon * abs(traj[-2][1]):
            break
    return RateSolution(best_r, best_r / delay_cap, best_f, it, traj)


def optimize_rate_multistart(table: DistortionTable, gamma: float, delay_cap: float,
                             blocklength: int, **kw) -> RateSolution:
    """Run :func:`optimize_rate` from every tabulated rate and keep the best."""
    best = None
    for r0 in table.rates:
        sol = optimize_rate(table, gamma, delay_cap, blocklength, start=float(r0), **kw)
        if best is None or sol.objective < best.objective:
            best = sol
    return best
