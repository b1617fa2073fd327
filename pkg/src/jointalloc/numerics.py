"""Gaussian tail functions and first-order expansions used by the SCA step.

Everything here is scalar and pure.  The Q-function is evaluated through
``erfc`` and its logarithm through the scaled complementary error function
``erfcx`` so that the tail stays finite far beyond the point where ``Q``
itself underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import erfc, erfcx

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_LOG_HALF = math.log(0.5)


@dataclass(frozen=True)
class QEval:
    x: float
    q: float
    log_q: float


def _check_finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"argument must be finite, got {x!r}")
    return x


def q_function(x: float) -> float:
    """Standard normal tail probability ``Q(x) = P(Z > x)``."""
    x = _check_finite(x)
    return 0.5 * float(erfc(x / _SQRT2))


def log_q(x: float) -> float:
    """Natural log of ``Q(x)``, finite for every representable ``x``.

    For positive arguments ``Q(x) = erfcx(x/sqrt2) * exp(-x^2/2) / 2``, which
    keeps the exponential factor out of floating point entirely.
    """
    x = _check_finite(x)
    if x > 0.0:
        return _LOG_HALF + math.log(erfcx(x / _SQRT2)) - 0.5 * x * x
    # Q(x) = 1 - Q(-x) >= 1/2 here
    return math.log1p(-0.5 * float(erfc(-x / _SQRT2)))


def log_q_derivative(x: float) -> float:
    """Derivative of :func:`log_q`, i.e. ``-phi(x) / Q(x)``.  Always negative."""
    x = _check_finite(x)
    if x >= 0.0:
        return -_SQRT_2_OVER_PI / float(erfcx(x / _SQRT2))
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return -pdf / q_function(x)


def q_eval(x: float) -> QEval:
    return QEval(x=float(x), q=q_function(x), log_q=log_q(x))


def tangent_l1(x0: float, y0: float, x: float, y: float) -> float:
    """First-order expansion of ``(x + y)**2`` around ``(x0, y0)``."""
    s0 = x0 + y0
    return 2.0 * s0 * (x - x0 + y - y0) + s0 * s0


def tangent_l2(x0: float, y0: float, x: float, y: float) -> float:
    """First-order expansion of ``(x - y)**2`` around ``(x0, y0)``."""
    d0 = x0 - y0
    return 2.0 * d0 * (x - x0 - y + y0) + d0 * d0


def tangent_l3(x0: float, x: float) -> float:
    """First-order expansion of ``-1/(1 + x)**2`` around ``x0`` (needs x0 > -1)."""
    a = 1.0 + x0
    return 2.0 / a**3 * (x - x0) - 1.0 / (a * a)
