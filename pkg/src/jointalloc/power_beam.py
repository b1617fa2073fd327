"""Joint power allocation and beamforming for fixed source/channel rates.

The downlink problem is moved to the virtual uplink through duality.  There
the receive beams have a closed form (MMSE), and the power allocation is
handled by successive convex approximation: slack variables turn the
distortion objective into a convex function of ``t`` and every nonconvex
constraint is replaced by a convex upper bound that is tight at the current
operating point.

Slack variables per user ``i``::

    t      logistic slack,  t = exp(-slope * log10_ber)
    rho    argument of Q in the packet error model
    g      sqrt(1 - 1/(1 + sinr)^2)
    zeta   lower bound on the uplink SINR
    xi     upper bound on the uplink SINR

Inside the convex subproblem ``t`` is rescaled by its value at the operating
point, because ``t`` itself spans hundreds of orders of magnitude.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .barrier import BarrierResult, ConvexProgram, barrier_solve
from .channel import (LN10, SystemConfig, downlink_to_uplink_power, gain_matrix,
                      log10_ber, matched_filter, q_argument, sinr_downlink, sinr_uplink,
                      uplink_to_downlink_power)
from .distortion import DistortionTable, LogisticRow, evaluate, interpolate
from .errors import DualityInfeasibleError, InfeasibleError, SCAError
from .numerics import log_q, log_q_derivative, tangent_l1, tangent_l2, tangent_l3

log = logging.getLogger(__name__)

EPS_SCA = 1e-4
EPS_JOINT = 1e-4
MAX_SCA_ITER = 50
MAX_JOINT_ITER = 30
_LOG10E = 1.0 / LN10
_EXP_CLIP = 700.0


@dataclass(frozen=True)
class ScaPoint:
    q: np.ndarray
    t: np.ndarray
    rho_hat: np.ndarray
    g: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.t, self.rho_hat, self.g, self.zeta, self.xi])


@dataclass(frozen=True)
class PowerBeamSolution:
    powers: np.ndarray
    beams: np.ndarray
    uplink_powers: np.ndarray
    uplink_beams: np.ndarray
    objective: float
    trajectory: list = field(default_factory=list)
    converged: bool = False


@dataclass(frozen=True)
class ScaResult:
    q: np.ndarray
    objective: float
    trajectory: list
    converged: bool


@dataclass(frozen=True)
class _User:
    row: LogisticRow
    r_c: float
    weight: float


def user_models(cfg: SystemConfig, rates, tables: Sequence[DistortionTable]) -> list[_User]:
    """Per-user interpolated logistic row, channel rate and weight."""
    r_s, r_c = (np.asarray(a, dtype=float) for a in rates)
    return [_User(interpolate(tables[i], float(r_s[i])), float(r_c[i]), float(cfg.weights[i]))
            for i in range(cfg.n_users)]


def _distortions(users, sinr, blocklength) -> np.ndarray:
    return np.array([evaluate(u.row, log10_ber(g, u.r_c, blocklength))
                     for u, g in zip(users, sinr)])


def uplink_objective(cfg: SystemConfig, rates, tables, q, beams_u) -> float:
    """Weighted-sum distortion of the virtual uplink."""
    users = user_models(cfg, rates, tables)
    d = _distortions(users, sinr_uplink(cfg, q, beams_u), cfg.blocklength)
    return float(cfg.weights @ d)


def downlink_objective(cfg: SystemConfig, rates, tables, p, beams) -> float:
    users = user_models(cfg, rates, tables)
    d = _distortions(users, sinr_downlink(cfg, powers=p, beams=beams), cfg.blocklength)
    return float(cfg.weights @ d)


def mmse_beam(cfg: SystemConfig, q) -> np.ndarray:
    """Unit-norm MMSE receive beams ``(I + sum_j q_j h_j h_j^H)^{-1} h_i``."""
    q = np.asarray(q, dtype=float)
    h = cfg.channel
    a = np.eye(cfg.n_tx) + (h * q) @ h.conj().T
    w = np.linalg.solve(a, h)
    return w / np.linalg.norm(w, axis=0)


# ---------------------------------------------------------------------------
# SCA machinery


def anchor_point(cfg: SystemConfig, rates, tables, q, beams_u) -> ScaPoint:
    """Slack values implied exactly by ``q`` (every convexified bound is tight)."""
    users = user_models(cfg, rates, tables)
    q = np.asarray(q, dtype=float)
    gamma = sinr_uplink(cfg, q, beams_u)
    g = np.sqrt(1.0 - 1.0 / (1.0 + gamma) ** 2)
    rho = np.empty(cfg.n_users)
    log_t = np.empty(cfg.n_users)
    for i, u in enumerate(users):
        x = q_argument(gamma[i], u.r_c, cfg.blocklength)
        rho[i] = x if math.isfinite(x) else -1e6
        log_t[i] = -u.row.slope * log10_ber(gamma[i], u.r_c, cfg.blocklength)
    t = np.exp(np.clip(log_t, -_EXP_CLIP, _EXP_CLIP))
    return ScaPoint(q=q.copy(), t=t, rho_hat=rho, g=g, zeta=gamma.copy(), xi=gamma.copy())


class _Subproblem:
    """Convexified power subproblem built around an operating point."""

    def __init__(self, cfg: SystemConfig, users: list[_User], beams_u, theta: ScaPoint):
        k = cfg.n_users
        self.k = k
        self.n = 6 * k
        self.p_max = cfg.p_max
        self.sqrt_l = math.sqrt(cfg.blocklength)
        self.gains = gain_matrix(cfg.channel, beams_u)  # [j, i] = |h_j^H w_i|^2
        self.diag = np.diag(self.gains).copy()
        self.off = self.gains * (1.0 - np.eye(k))        # zero on the diagonal
        self.gamma_bar = cfg.p_max * self.diag
        self.theta = theta
        self.weights = np.array([u.weight for u in users])
        self.floor = np.array([u.row.floor for u in users])
        self.span = np.array([u.row.span for u in users])
        self.slope = np.array([u.row.slope for u in users])
        self.mid = np.array([u.row.midpoint for u in users])
        self.r_c = np.array([u.r_c for u in users])
        self.prefix = -np.log10(self.r_c * cfg.blocklength)
        self.log_t0 = np.log(np.maximum(theta.t, np.exp(-_EXP_CLIP)))
        log_m = np.clip(self.slope * self.mid + self.log_t0, -_EXP_CLIP, _EXP_CLIP)
        self.inv_m = np.exp(-log_m)
        self.lq0 = np.array([log_q(x) for x in theta.rho_hat])
        self.dlq0 = np.array([log_q_derivative(x) for x in theta.rho_hat])
        self.n_cons = 1 + 5 * k + 8 * k

    # variable blocks
    def split(self, x):
        k = self.k
        return (x[0:k], x[k:2 * k], x[2 * k:3 * k], x[3 * k:4 * k], x[4 * k:5 * k],
                x[5 * k:6 * k])

    def start(self) -> np.ndarray:
        """A strictly feasible point near the operating point when one is easy to find.

        Backs every slack off its tight value by a small margin.  Falls back
        to the (tight, hence infeasible for a barrier) operating point, which
        makes the solver run phase I.
        """
        th = self.theta
        tight = np.concatenate([th.q, np.ones(self.k), th.rho_hat, th.g, th.zeta, th.xi])
        for delta in (1e-3, 1e-5):
            x = self._backed_off(delta)
            if x is not None:
                vals, _ = self.constraints(x)
                if np.all(np.isfinite(vals)) and np.all(vals < 0):
                    return x
        return tight

    def _backed_off(self, delta):
        th = self.theta
        q = th.q * (1.0 - delta)
        gamma = (q * self.diag) / (self.off.T @ q + 1.0)
        zeta = gamma * (1.0 - delta)
        xi = np.minimum(gamma * (1.0 + delta) + delta * 1e-3, self.gamma_bar * (1 - 1e-12))
        need = (1.0 + tangent_l3(th.xi, xi) - th.g**2) / (2.0 * np.maximum(th.g, 1e-300)) + th.g
        g = need + delta * (1.0 - need)
        if np.any(g >= 1.0) or np.any(th.g <= 0):
            return None
        x_rhs = self.sqrt_l * (np.log1p(zeta) - self.r_c * math.log(2.0))
        rho = (x_rhs - delta * (1.0 + np.abs(x_rhs))) / g
        d0 = th.rho_hat - th.g
        for _ in range(60):
            lhs = 0.25 * ((rho + g) ** 2 - tangent_l2(th.rho_hat, th.g, rho, g))
            bad = lhs >= x_rhs
            if not np.any(bad):
                break
            rho = np.where(bad, rho - (lhs - x_rhs + delta) / np.maximum(g + 0.5 * np.abs(rho - g - d0), 1e-12), rho)
        room = 1.0 - self.log_t0 - self.slope * (
            self.prefix + _LOG10E * (self.lq0 + self.dlq0 * (rho - th.rho_hat)))
        if np.any(room <= 0):
            return None
        tau = 0.5 * room
        return np.concatenate([q, tau, rho, g, zeta, xi])

    def to_point(self, x) -> ScaPoint:
        q, tau, rho, g, zeta, xi = (np.array(v) for v in self.split(x))
        return ScaPoint(q=q, t=tau * np.exp(self.log_t0), rho_hat=rho, g=g, zeta=zeta, xi=xi)

    # objective: sum_i w_i (floor_i + span_i / (1 + M_i tau_i))
    def objective(self, x):
        k = self.k
        tau = x[k:2 * k]
        denom = self.inv_m + tau                 # (1 + M tau) / M
        frac = self.inv_m / denom                # 1 / (1 + M tau)
        r = 1.0 / denom                          # M / (1 + M tau)
        ws = self.weights * self.span
        f = float(np.sum(self.weights * self.floor + ws * frac))
        grad = np.zeros(self.n)
        grad[k:2 * k] = -ws * r * frac
        hess = np.zeros((self.n, self.n))
        idx = np.arange(k, 2 * k)
        hess[idx, idx] = 2.0 * ws * r * r * frac
        return f, grad, hess

    def constraints(self, x):
        k, n = self.k, self.n
        q, tau, rho, g, zeta, xi = self.split(x)
        th = self.theta
        vals = np.empty(self.n_cons)
        jac = np.zeros((self.n_cons, n))
        iq, it, ir, ig, iz, ix = (np.arange(b * k, (b + 1) * k) for b in range(6))
        rows = np.arange(k)
        c = 0
        # total power
        vals[c] = q.sum() - self.p_max
        jac[c, iq] = 1.0
        c += 1
        # logistic slack: linearised log t and log Q
        vals[c:c + k] = (tau - 1.0 + self.log_t0
                         + self.slope * (self.prefix + _LOG10E * (self.lq0 + self.dlq0 * (rho - th.rho_hat))))
        jac[c + rows, it] = 1.0
        jac[c + rows, ir] = self.slope * _LOG10E * self.dlq0
        c += k
        # rho * g <= sqrt(L) (ln(1+zeta) - R_c ln 2), bilinear term bounded above
        d0 = th.rho_hat - th.g
        vals[c:c + k] = (0.25 * ((rho + g) ** 2 - tangent_l2(th.rho_hat, th.g, rho, g))
                         - self.sqrt_l * (np.log1p(zeta) - self.r_c * math.log(2.0)))
        jac[c + rows, ir] = 0.5 * (rho + g) - 0.5 * d0
        jac[c + rows, ig] = 0.5 * (rho + g) + 0.5 * d0
        jac[c + rows, iz] = -self.sqrt_l / (1.0 + zeta)
        c += k
        # zeta below the uplink SINR
        zq = zeta[:, None] + q[None, :]                  # [i, j] = zeta_i + q_j
        dz0 = th.zeta[:, None] - th.q[None, :]
        lz = tangent_l2(th.zeta[:, None], th.q[None, :], zeta[:, None], q[None, :])
        goff = self.off.T                                # [i, j] = |h_j^H w_i|^2, zero diag
        vals[c:c + k] = np.sum(0.25 * (zq**2 - lz) * goff, axis=1) + zeta - q * self.diag
        jac[c + rows, iz] = np.sum(0.5 * (zq - dz0) * goff, axis=1) + 1.0
        jac[c:c + k, iq] = 0.5 * (zq + dz0) * goff
        jac[c + rows, iq] -= self.diag
        c += k
        # xi above the uplink SINR
        xq = xi[:, None] - q[None, :]
        sx0 = th.xi[:, None] + th.q[None, :]
        lx = tangent_l1(th.xi[:, None], th.q[None, :], xi[:, None], q[None, :])
        vals[c:c + k] = np.sum(0.25 * (xq**2 - lx) * goff, axis=1) - xi + q * self.diag
        jac[c + rows, ix] = np.sum(0.5 * (xq - sx0) * goff, axis=1) - 1.0
        jac[c:c + k, iq] = 0.5 * (-xq - sx0) * goff
        jac[c + rows, iq] += self.diag
        c += k
        # dispersion slack: 1 - 1/(1+xi)^2 <= g^2, both sides linearised
        vals[c:c + k] = (1.0 + tangent_l3(th.xi, xi)
                         - (th.g**2 + 2.0 * th.g * (g - th.g)))
        jac[c + rows, ix] = 2.0 / (1.0 + th.xi) ** 3
        jac[c + rows, ig] = -2.0 * th.g
        c += k
        # boxes
        for block, idx, upper in ((q, iq, None), (tau, it, None), (g, ig, 1.0),
                                  (zeta, iz, self.gamma_bar), (xi, ix, self.gamma_bar)):
            vals[c:c + k] = -block
            jac[c + rows, idx] = -1.0
            c += k
            if upper is not None:
                vals[c:c + k] = block - upper
                jac[c + rows, idx] = 1.0
                c += k
        assert c == self.n_cons
        return vals, jac

    def constraint_hessian(self, x, w):
        k = self.k
        h = np.zeros((self.n, self.n))
        q, tau, rho, g, zeta, xi = self.split(x)
        iq, it, ir, ig, iz, ix = (np.arange(b * k, (b + 1) * k) for b in range(6))
        c = 1 + k
        w47 = w[c:c + k]
        h[ir, ir] += 0.5 * w47
        h[ig, ig] += 0.5 * w47
        h[ir, ig] += 0.5 * w47
        h[ig, ir] += 0.5 * w47
        h[iz, iz] += w47 * self.sqrt_l / (1.0 + zeta) ** 2
        c += k
        goff = self.off.T
        for sign, var, wblk in ((1.0, iz, w[c:c + k]), (-1.0, ix, w[c + k:c + 2 * k])):
            a = 0.5 * goff * wblk[:, None]               # [i, j]
            h[var, var] += a.sum(axis=1)
            h[iq, iq] += a.sum(axis=0)
            h[np.ix_(var, iq)] += sign * a
            h[np.ix_(iq, var)] += sign * a.T
        return h

    def program(self) -> ConvexProgram:
        return ConvexProgram(self.n, self.objective, self.constraints, self.constraint_hessian)


def true_constraint_lhs(cfg: SystemConfig, users, beams_u, point: ScaPoint) -> np.ndarray:
    """Left sides of the unconvexified slack constraints, stacked per family."""
    gains = gain_matrix(cfg.channel, beams_u)
    off = (gains * (1.0 - np.eye(cfg.n_users))).T
    diag = np.diag(gains)
    slope = np.array([u.row.slope for u in users])
    r_c = np.array([u.r_c for u in users])
    lq = np.array([log_q(x) for x in point.rho_hat])
    sl = math.sqrt(cfg.blocklength)
    c_t = np.log(point.t) + slope * (-np.log10(r_c * cfg.blocklength) + lq * _LOG10E)
    c_rho = point.rho_hat * point.g - sl * (np.log1p(point.zeta) - r_c * math.log(2.0))
    c_g = 1.0 - 1.0 / (1.0 + point.xi) ** 2 - point.g**2
    c_zeta = point.zeta * (off @ point.q) + point.zeta - point.q * diag
    c_xi = -point.xi * (off @ point.q) - point.xi + point.q * diag
    return np.concatenate([c_t, c_rho, c_g, c_zeta, c_xi])


def convexified_constraint_lhs(cfg: SystemConfig, users, beams_u, theta: ScaPoint,
                               point: ScaPoint) -> np.ndarray:
    """Convex upper bounds built at ``theta``, evaluated at ``point``.

    Same family order as :func:`true_constraint_lhs`; each entry bounds the
    matching true entry from above and equals it at ``point == theta``.
    """
    sub = _Subproblem(cfg, users, beams_u, theta)
    k = cfg.n_users
    x = np.concatenate([point.q, point.t / np.exp(sub.log_t0), point.rho_hat, point.g,
                        point.zeta, point.xi])
    v, _ = sub.constraints(x)
    fam = [v[1 + j * k:1 + (j + 1) * k] for j in range(5)]   # t, rho, zeta, xi, g
    return np.concatenate([fam[0], fam[1], fam[4], fam[2], fam[3]])


def _solve(cfg, users, beams_u, theta: ScaPoint) -> tuple[ScaPoint, BarrierResult]:
    sub = _Subproblem(cfg, users, beams_u, theta)
    try:
        res = barrier_solve(sub.program(), sub.start())
    except InfeasibleError as exc:
        raise SCAError(f"convexified subproblem infeasible: {exc}") from exc
    return sub.to_point(res.x), res


def sca_subproblem(cfg: SystemConfig, rates, tables, theta_n: ScaPoint, beams_u) -> ScaPoint:
    """Solve the convexified power problem built at ``theta_n``."""
    users = user_models(cfg, rates, tables)
    point, _ = _solve(cfg, users, beams_u, theta_n)
    return point


def subproblem_objective(cfg: SystemConfig, rates, tables, point: ScaPoint) -> float:
    """Slack-form objective ``sum w (floor + span / (1 + c t))`` at ``point``."""
    users = user_models(cfg, rates, tables)
    total = 0.0
    for u, t in zip(users, point.t):
        log_ct = min(u.row.slope * u.row.midpoint + math.log(max(t, 1e-300)), _EXP_CLIP)
        total += u.weight * (u.row.floor + u.row.span / (1.0 + math.exp(log_ct)))
    return total


def _positive(q, p_max):
    q = np.maximum(np.asarray(q, dtype=float), 0.0)
    floor = 1e-9 * p_max
    if np.any(q < floor):
        q = np.maximum(q, floor)
    return q


def _fill_budget(q, p_max):
    s = q.sum()
    return q * (p_max / s) if s > 0 else q


def sca_power(cfg: SystemConfig, rates, tables, beams_u, q_init, *,
              epsilon: float = EPS_SCA, max_iter: int = MAX_SCA_ITER) -> ScaResult:
    """Successive convex approximation of the uplink power allocation.

    Each iterate solves the subproblem at the re-anchored slack point.  The
    returned powers use the whole budget, which can only raise every uplink
    SINR.  A candidate that worsens the true objective is pulled back toward
    the incumbent along the segment between them; if no such point helps,
    the iteration stops.
    """
    users = user_models(cfg, rates, tables)
    q = _fill_budget(_positive(q_init, cfg.p_max), cfg.p_max)

    def true_obj(qq):
        return float(cfg.weights @ _distortions(users, sinr_uplink(cfg, qq, beams_u),
                                                cfg.blocklength))

    f = true_obj(q)
    traj = [f]
    converged = False
    if cfg.n_users == 1:
        return ScaResult(q=np.array([cfg.p_max]), objective=true_obj(np.array([cfg.p_max])),
                         trajectory=[f, true_obj(np.array([cfg.p_max]))], converged=True)
    for _ in range(max_iter):
        theta = anchor_point(cfg, rates, tables, q, beams_u)
        point, _ = _solve(cfg, users, beams_u, theta)
        cand = _fill_budget(_positive(point.q, cfg.p_max), cfg.p_max)
        fc = true_obj(cand)
        step = 1.0
        while fc > f and step > 1e-3:
            step *= 0.5
            mix = q + step * (cand - q)
            fm = true_obj(mix)
            if fm <= f:
                cand, fc = mix, fm
                break
        if fc > f:
            converged = True
            break
        decrease = f - fc
        q, f = cand, fc
        traj.append(f)
        if decrease <= epsilon * abs(traj[-2]):
            converged = True
            break
    return ScaResult(q=q, objective=f, trajectory=traj, converged=converged)


def joint_power_beam(cfg: SystemConfig, rates, tables, p_init=None, w_init=None, *,
                     epsilon: float = EPS_JOINT, max_iter: int = MAX_JOINT_ITER,
                     eps_sca: float = EPS_SCA, max_sca_iter: int = MAX_SCA_ITER
                     ) -> PowerBeamSolution:
    """Alternate MMSE beams and SCA powers on the uplink, then map back down."""
    if p_init is None:
        p_init = np.full(cfg.n_users, cfg.p_max / cfg.n_users)
    if w_init is None:
        w_init = matched_filter(cfg)
    try:
        q = downlink_to_uplink_power(cfg, w_init, p_init)
    except DualityInfeasibleError:
        log.warning("initial point not dual-feasible, restarting from equal power")
        w_init = matched_filter(cfg)
        q = downlink_to_uplink_power(cfg, w_init, np.full(cfg.n_users, cfg.p_max / cfg.n_users))
    q = _fill_budget(_positive(q, cfg.p_max), cfg.p_max)
    w_u = np.array(w_init, dtype=complex)
    f = uplink_objective(cfg, rates, tables, q, w_u)
    traj = [f]
    converged = False
    for _ in range(max_iter):
        w_u = mmse_beam(cfg, q)
        res = sca_power(cfg, rates, tables, w_u, q, epsilon=eps_sca, max_iter=max_sca_iter)
        q = res.q
        fn = res.objective
        decrease = f - fn
        f = fn
        traj.append(f)
        if decrease <= epsilon * abs(traj[-2]):
            converged = True
            break
    p = uplink_to_downlink_power(cfg, w_u, q)
    f_down = downlink_objective(cfg, rates, tables, p, w_u)
    return PowerBeamSolution(powers=p, beams=w_u, uplink_powers=q, uplink_beams=w_u,
                             objective=f_down, trajectory=traj, converged=converged)
