"""Small dense log-barrier interior-point solver.

Solves ``min f0(x)  s.t.  f_i(x) <= 0`` for smooth convex ``f0, f_i`` given
callbacks for values, gradients and Hessians.  Problems here have a few dozen
variables, so everything is dense and Newton systems are solved directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import InfeasibleError


@dataclass
class ConvexProgram:
    """Callback description of a smooth convex program.

    objective(x) -> (f, grad, hess)
    constraints(x) -> (values (m,), jacobian (m, n))
    constraint_hessian(x, weights) -> sum_i weights[i] * hess f_i(x)
    """

    n: int
    objective: Callable
    constraints: Callable
    constraint_hessian: Callable


@dataclass
class BarrierResult:
    x: np.ndarray
    objective: float
    gap: float
    newton_steps: int
    kkt_residual: float
    duals: np.ndarray


def _centering(prog: ConvexProgram, x: np.ndarray, t: float, tol: float,
               max_steps: int, stop=None):
    # trial points may leave a constraint's domain; they are rejected below
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        return _newton_loop(prog, x, t, tol, max_steps, stop)


def _newton_loop(prog, x, t, tol, max_steps, stop):
    steps = 0
    for _ in range(max_steps):
        f0, g0, h0 = prog.objective(x)
        fc, jc = prog.constraints(x)
        inv = 1.0 / (-fc)
        grad = t * g0 + jc.T @ inv
        hess = (t * h0 + (jc.T * inv**2) @ jc
                + prog.constraint_hessian(x, inv))
        hess = 0.5 * (hess + hess.T)
        try:
            dx = scipy.linalg.solve(hess, -grad, assume_a="sym")
        except (np.linalg.LinAlgError, ValueError):
            dx = -np.linalg.lstsq(hess, grad, rcond=None)[0]
        lam2 = float(-grad @ dx)
        steps += 1
        if lam2 / 2.0 <= tol or not np.isfinite(lam2):
            break
        phi0 = t * f0 - np.sum(np.log(-fc))
        s = 1.0
        while s > 1e-14:
            xn = x + s * dx
            fcn, _ = prog.constraints(xn)
            if np.all(np.isfinite(fcn)) and np.all(fcn < 0):
                f0n = prog.objective(xn)[0]
                phin = t * f0n - np.sum(np.log(-fcn))
                if np.isfinite(phin) and phin <= phi0 - 0.01 * s * lam2:
                    break
            s *= 0.5
        else:
            break
        x = xn
        if stop is not None and stop(x):
            break
    return x, steps


def barrier_solve(prog: ConvexProgram, x0, *, t0: float = 1.0, mu: float = 10.0,
                  gap_tol: float = 1e-7, newton_tol: float = 1e-9,
                  max_newton: int = 100, max_outer: int = 60) -> BarrierResult:
    """Interior-point solve from a strictly feasible ``x0``.

    If ``x0`` is not strictly feasible a phase-I problem is solved first;
    :class:`InfeasibleError` is raised when the feasible set has no interior.
    """
    x = np.asarray(x0, dtype=float).copy()
    fc, _ = prog.constraints(x)
    if not (np.all(np.isfinite(fc)) and np.all(fc < 0)):
        x = find_strictly_feasible(prog, x)
        fc, _ = prog.constraints(x)
    m = fc.size
    t = t0
    total = 0
    for _ in range(max_outer):
        x, steps = _centering(prog, x, t, newton_tol, max_newton)
        total += steps
        if m / t < gap_tol:
            break
        t *= mu
    f0, g0, _ = prog.objective(x)
    fc, jc = prog.constraints(x)
    lam = 1.0 / (-t * fc)
    kkt = float(np.linalg.norm(g0 + jc.T @ lam))
    return BarrierResult(x=x, objective=float(f0), gap=m / t, newton_steps=total,
                         kkt_residual=kkt, duals=lam)


def find_strictly_feasible(prog: ConvexProgram, x0, *, margin: float = 1e-7) -> np.ndarray:
    """Phase I: minimise ``s`` subject to ``f_i(x) <= s``; return ``x`` once ``s < 0``."""
    x0 = np.asarray(x0, dtype=float)
    fc, _ = prog.constraints(x0)
    if not np.all(np.isfinite(fc)):
        raise InfeasibleError("constraints are not finite at the phase-I start")
    n = prog.n
    s0 = float(np.max(fc)) + 1.0

    def obj(z):
        g = np.zeros(n + 1)
        g[-1] = 1.0
        return z[-1], g, np.zeros((n + 1, n + 1))

    def cons(z):
        v, j = prog.constraints(z[:-1])
        vals = np.append(v - z[-1], -z[-1] - 1.0)
        jac = np.zeros((v.size + 1, n + 1))
        jac[:-1, :-1] = j
        jac[:-1, -1] = -1.0
        jac[-1, -1] = -1.0
        return vals, jac

    def chess(z, w):
        h = np.zeros((n + 1, n + 1))
        h[:-1, :-1] = prog.constraint_hessian(z[:-1], w[:-1])
        return h

    phase1 = ConvexProgram(n + 1, obj, cons, chess)
    z = np.append(x0, s0)
    t = 1.0
    m = fc.size + 1
    for _ in range(60):
        z, _ = _centering(phase1, z, t, 1e-10, 100, stop=lambda zz: zz[-1] < -margin)
        if z[-1] < -margin:
            return z[:-1]
        if m / t < 1e-10:
            break
        t *= 10.0
    if z[-1] < 0:
        return z[:-1]
    raise InfeasibleError(f"no strictly feasible point (phase-I optimum {z[-1]:.3e})")
