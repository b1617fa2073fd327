"""Scenario handling, the alternating rate/power/beam solver and baselines.

The outer loop alternates per-user rate selection (power and beams fixed)
with joint power/beam optimisation (rates fixed) on continuous source rates.
Once the weighted distortion stops improving the rates are rounded down to
the nearest tabulated codec and the power/beam step is run once more.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import power_beam as pb
from .channel import (DATA, SEMANTIC, Allocation, LinkMetrics, SystemConfig, gain_matrix,
                      link_metrics, matched_filter, sinr_downlink)
from .distortion import DistortionTable, e2e_distortion
from .errors import (BaselineInapplicableError, ConfigurationError, DualityInfeasibleError,
                     InfeasibleError, SCAError)
from .rate_opt import objective_at, optimize_rate, optimize_rate_multistart

log = logging.getLogger(__name__)

BUILTIN_PREFIX = "builtin:"


@dataclass(frozen=True)
class SolverSettings:
    eps_ao: float = 1e-4
    max_ao: int = 20
    eps_rate: float = 1e-5
    max_rate_iter: int = 500
    eps_sca: float = pb.EPS_SCA
    max_sca_iter: int = pb.MAX_SCA_ITER
    eps_joint: float = pb.EPS_JOINT
    max_joint_iter: int = pb.MAX_JOINT_ITER
    seed: int = 0
    multistart: bool = False


@dataclass(frozen=True)
class Scenario:
    system: SystemConfig
    tables: tuple[DistortionTable, ...]
    solver: SolverSettings = field(default_factory=SolverSettings)
    name: str = "scenario"

    def __post_init__(self):
        if len(self.tables) != self.system.n_users:
            raise ConfigurationError("one distortion table per user is required")
        for i, (kind, tab) in enumerate(zip(self.system.kinds, self.tables)):
            if tab.kind != kind:
                raise ConfigurationError(f"user {i} is {kind} but its table is {tab.kind}")

    def with_system(self, **changes) -> "Scenario":
        return replace(self, system=self.system.replace(**changes))


@dataclass
class SolverReport:
    allocation: Allocation
    metrics: LinkMetrics
    objective: float
    trajectory: list = field(default_factory=list)
    continuous_objective: float | None = None
    discretization_delta: float | None = None
    wall_time: float = 0.0
    converged: bool = True
    failure: str | None = None
    label: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# scenario files


def builtin_table(kind: str) -> DistortionTable:
    name = {DATA: "data_table.json", SEMANTIC: "semantic_table.json"}[kind]
    text = resources.files("jointalloc").joinpath("data").joinpath(name).read_text()
    return DistortionTable.from_dict(json.loads(text))


def _load_table(ref, base: Path) -> DistortionTable:
    if isinstance(ref, dict):
        return DistortionTable.from_dict(ref)
    if ref.startswith(BUILTIN_PREFIX):
        return builtin_table(ref[len(BUILTIN_PREFIX):])
    path = Path(ref)
    if not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ConfigurationError(f"distortion table {path} does not exist")
    return DistortionTable.load(path)


def _parse_channel(cols) -> np.ndarray:
    arr = np.asarray(cols, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ConfigurationError("channel must be a list of user columns of [re, im] pairs")
    return (arr[..., 0] + 1j * arr[..., 1]).T


def scenario_from_dict(doc: dict, base_dir=".") -> Scenario:
    base = Path(base_dir)
    system = doc["system"]
    users = system["users"]
    caps, weights, kinds, tables = [], [], [], []
    for i, u in enumerate(users):
        kinds.append(u["kind"])
        weights.append(float(u["weight"]))
        if "delay_cap" in u:
            caps.append(float(u["delay_cap"]))
        elif "bandwidth_ratio" in u:
            if "source_dim" not in u:
                raise ConfigurationError(f"user {i}: bandwidth_ratio needs source_dim")
            caps.append(float(u["bandwidth_ratio"]) * float(u["source_dim"]))
        else:
            raise ConfigurationError(f"user {i}: give delay_cap or bandwidth_ratio")
        tables.append(_load_table(u["table"], base))
    h = _parse_channel(system["channel"])
    if "n_tx" in system and int(system["n_tx"]) != h.shape[0]:
        raise ConfigurationError(f"n_tx={system['n_tx']} but channel vectors have {h.shape[0]} entries")
    kw = dict(p_max=float(system["p_max"]), blocklength=int(system["blocklength"]),
              delay_caps=caps, weights=weights, kinds=tuple(kinds))
    if "noise_vars" in system:
        cfg = SystemConfig.from_raw(h, system["noise_vars"], **kw)
    else:
        cfg = SystemConfig(channel=h, **kw)
    solver = doc.get("solver", {})
    eps = solver.get("epsilons", {})
    iters = solver.get("max_iters", {})
    settings = SolverSettings(
        eps_ao=eps.get("ao", 1e-4), eps_rate=eps.get("rate", 1e-5),
        eps_sca=eps.get("sca", pb.EPS_SCA), eps_joint=eps.get("joint", pb.EPS_JOINT),
        max_ao=iters.get("ao", 20), max_rate_iter=iters.get("rate", 500),
        max_sca_iter=iters.get("sca", pb.MAX_SCA_ITER),
        max_joint_iter=iters.get("joint", pb.MAX_JOINT_ITER),
        seed=int(solver.get("seed", 0)), multistart=bool(solver.get("multistart", False)))
    return Scenario(cfg, tuple(tables), settings, name=doc.get("name", "scenario"))


def load_scenario(path) -> Scenario:
    """Read a scenario file; ``builtin:golden_L256`` names a shipped scenario."""
    if isinstance(path, str) and path.startswith(BUILTIN_PREFIX):
        name = path[len(BUILTIN_PREFIX):]
        res = resources.files("jointalloc").joinpath("data").joinpath(f"{name}.json")
        if not res.is_file():
            raise ConfigurationError(f"no builtin scenario named {name!r}")
        return scenario_from_dict(json.loads(res.read_text()))
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"scenario file {path} does not exist")
    return scenario_from_dict(json.loads(path.read_text()), path.parent)


def golden_scenario(blocklength: int = 256) -> Scenario:
    """Two users (data, semantic) on the reference 2x2 channel with a 3 W budget."""
    return load_scenario(f"{BUILTIN_PREFIX}golden_L{blocklength}")


# ---------------------------------------------------------------------------
# evaluation


def evaluate_allocation(scenario: Scenario, alloc: Allocation) -> tuple[float, LinkMetrics]:
    """Weighted distortion and per-user link metrics of a downlink allocation."""
    cfg = scenario.system
    gamma = sinr_downlink(cfg, alloc)
    lm = link_metrics(cfg, gamma, alloc.channel_rates)
    dist = np.array([e2e_distortion(t, r, b)
                     for t, r, b in zip(scenario.tables, alloc.source_rates, lm.log10_ber)])
    lm = replace(lm, distortion=dist)
    return float(cfg.weights @ dist), lm


def _report(scenario, alloc, **kw) -> SolverReport:
    obj, lm = evaluate_allocation(scenario, alloc)
    return SolverReport(allocation=alloc, metrics=lm, objective=obj, **kw)


def _rate_step(scenario: Scenario, gamma, current=None):
    cfg, s = scenario.system, scenario.solver
    rs = np.empty(cfg.n_users)
    for i, tab in enumerate(scenario.tables):
        args = (tab, float(gamma[i]), float(cfg.delay_caps[i]), cfg.blocklength)
        opt = optimize_rate_multistart if s.multistart else optimize_rate
        sol = opt(*args, epsilon=s.eps_rate, max_iter=s.max_rate_iter)
        r = sol.source_rate
        if current is not None:
            # never accept a rate worse than the one already held
            cur = float(np.clip(current[i], tab.r_min, tab.r_max))
            if objective_at(*args, cur) < sol.objective:
                r = cur
        rs[i] = r
    return rs, rs / cfg.delay_caps


def _power_step(scenario: Scenario, rates, p, w) -> pb.PowerBeamSolution:
    s = scenario.solver
    return pb.joint_power_beam(scenario.system, rates, scenario.tables, p, w,
                               epsilon=s.eps_joint, max_iter=s.max_joint_iter,
                               eps_sca=s.eps_sca, max_sca_iter=s.max_sca_iter)


def discretize(scenario: Scenario, source_rates) -> tuple[np.ndarray, np.ndarray]:
    """Round every source rate down to a tabulated one; ``R_c = R_s / T``."""
    rs = np.array([t.round_down(float(r)) for t, r in zip(scenario.tables, source_rates)])
    return rs, rs / scenario.system.delay_caps


def jrpb_solve(scenario: Scenario, init: Allocation | None = None) -> SolverReport:
    """Alternate rate and power/beam optimisation, then discretise the rates."""
    t0 = time.perf_counter()
    cfg, s = scenario.system, scenario.solver
    if init is None:
        p = np.full(cfg.n_users, cfg.p_max / cfg.n_users)
        w = matched_filter(cfg)
        rs_cur = None
    else:
        p = np.array(init.powers, dtype=float)
        if p.sum() > cfg.p_max:
            p *= cfg.p_max / p.sum()
        w = np.array(init.beams)
        rs_cur = np.array(init.source_rates)
    incumbent = None
    traj: list[float] = []
    converged = False
    failure = None
    try:
        for _ in range(s.max_ao):
            gamma = sinr_downlink(cfg, powers=p, beams=w)
            rates = _rate_step(scenario, gamma, rs_cur)
            sol = _power_step(scenario, rates, p, w)
            p, w, rs_cur = sol.powers, sol.beams, rates[0]
            obj = sol.objective
            incumbent = (rates, p, w)
            traj.append(obj)
            if len(traj) > 1 and traj[-2] - obj <= s.eps_ao * abs(traj[-2]):
                converged = True
                break
        cont_obj = traj[-1]
        rates_d = discretize(scenario, rs_cur)
        sol = _power_step(scenario, rates_d, p, w)
        alloc = Allocation(rates_d[0], rates_d[1], sol.powers, sol.beams)
    except (SCAError, DualityInfeasibleError, InfeasibleError) as exc:
        failure = f"{type(exc).__name__}: {exc}"
        log.warning("jrpb_solve failed: %s", failure)
        if incumbent is None:
            rates_d = discretize(scenario, [t.r_min for t in scenario.tables])
            alloc = Allocation(rates_d[0], rates_d[1], np.full(cfg.n_users, cfg.p_max / cfg.n_users),
                               matched_filter(cfg))
            cont_obj = None
        else:
            rates, p, w = incumbent
            rates_d = discretize(scenario, rates[0])
            alloc = Allocation(rates_d[0], rates_d[1], p, w)
            cont_obj = traj[-1]
    rep = _report(scenario, alloc, trajectory=traj, continuous_objective=cont_obj,
                  converged=converged and failure is None, failure=failure)
    if cont_obj is not None:
        rep.discretization_delta = rep.objective - cont_obj
    rep.wall_time = time.perf_counter() - t0
    return rep


def polish(scenario: Scenario, alloc: Allocation) -> SolverReport:
    """Re-run the power/beam step with ``alloc``'s (discrete) rates held fixed."""
    t0 = time.perf_counter()
    cfg = scenario.system
    p = np.array(alloc.powers, dtype=float)
    if p.sum() > cfg.p_max:
        p *= cfg.p_max / p.sum()
    rates = (np.array(alloc.source_rates), np.array(alloc.source_rates) / cfg.delay_caps)
    sol = _power_step(scenario, rates, p, alloc.beams)
    rep = _report(scenario, Allocation(rates[0], rates[1], sol.powers, sol.beams),
                  trajectory=list(sol.trajectory))
    rep.wall_time = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# zero-forcing + waterfilling baseline


def zero_forcing(cfg: SystemConfig) -> np.ndarray:
    """Unit-norm zero-forcing beams (columns of the channel pseudo-inverse)."""
    if cfg.n_users > cfg.n_tx:
        raise BaselineInapplicableError(
            f"zero-forcing needs K <= N_t, got K={cfg.n_users}, N_t={cfg.n_tx}")
    h = cfg.channel
    w = h @ np.linalg.inv(h.conj().T @ h)
    return w / np.linalg.norm(w, axis=0)


def waterfilling(gains, p_total: float, noise: float = 1.0) -> np.ndarray:
    """Classical waterfilling over parallel channels with power gains ``gains``."""
    g = np.asarray(gains, dtype=float)
    order = np.argsort(g)[::-1]
    inv = noise / g[order]
    p = np.zeros(g.size)
    for n in range(g.size, 0, -1):
        level = (p_total + inv[:n].sum()) / n
        if level > inv[n - 1]:
            p[order[:n]] = level - inv[:n]
            break
    return p


def zf_waterfilling_baseline(scenario: Scenario, fixed_channel_rates=None) -> SolverReport:
    """ZF beams with waterfilled powers; rates are either fixed or optimised.

    With ``fixed_channel_rates`` each user keeps its channel code rate and
    uses the largest tabulated source rate that fits the delay cap.  Without
    it the rates come from the per-user rate optimiser at the ZF SINRs,
    rounded down to a tabulated codec.
    """
    t0 = time.perf_counter()
    cfg = scenario.system
    w = zero_forcing(cfg)
    gains = np.diag(gain_matrix(cfg.channel, w)).copy()
    p = waterfilling(gains, cfg.p_max)
    gamma = sinr_downlink(cfg, powers=p, beams=w)
    if fixed_channel_rates is not None:
        rc = np.asarray(fixed_channel_rates, dtype=float).reshape(-1)
        if rc.size != cfg.n_users:
            raise ConfigurationError("one fixed channel rate per user is required")
        rs = np.array([t.round_down(r * cap) for t, r, cap in
                       zip(scenario.tables, rc, cfg.delay_caps)])
        # a channel rate too low for even the smallest codec is raised to fit it
        rc = np.maximum(rc, rs / cfg.delay_caps)
    else:
        rs, _ = _rate_step(scenario, gamma)
        rs, rc = discretize(scenario, rs)
    rep = _report(scenario, Allocation(rs, rc, p, w))
    rep.wall_time = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# sweeps


def sweep_power(scenario: Scenario, p_values: Sequence[float]) -> list[SolverReport]:
    """Solve at each power budget (ascending order is processed first to last).

    Each point keeps the best of three candidates: a cold start, a warm start
    from the previous point, and the previous allocation re-optimised here.
    """
    reports = []
    prev = None
    for pm in p_values:
        sc = scenario.with_system(p_max=float(pm))
        try:
            cands = [jrpb_solve(sc)]
            if prev is not None and prev.allocation.powers.sum() <= pm * (1 + 1e-12):
                cands.append(jrpb_solve(sc, init=prev.allocation))
                cands.append(polish(sc, prev.allocation))
            best = min(cands, key=lambda r: r.objective)
        except Exception as exc:  # a failed point must not end the sweep
            log.warning("sweep point p_max=%s failed: %s", pm, exc)
            reports.append(None)
            continue
        best.label = {"p_max": float(pm)}
        reports.append(best)
        prev = best
    return reports


def sweep_weights(scenario: Scenario, weight_list: Sequence[Sequence[float]]) -> list[SolverReport]:
    reports = []
    for wts in weight_list:
        sc = scenario.with_system(weights=np.asarray(wts, dtype=float))
        try:
            rep = jrpb_solve(sc)
        except Exception as exc:
            log.warning("sweep point weights=%s failed: %s", wts, exc)
            reports.append(None)
            continue
        rep.label = {f"weight_{i}": float(x) for i, x in enumerate(wts)}
        reports.append(rep)
    return reports


# ---------------------------------------------------------------------------
# output


def _fmt(x: float) -> str:
    return f"{float(x):.10g}"


def reports_to_csv(reports: Sequence[SolverReport | None], n_users: int) -> str:
    """One row per report; label columns first, then per-user fields."""
    labels: list[str] = []
    for r in reports:
        if r is not None:
            for k in r.label:
                if k not in labels:
                    labels.append(k)
    per_user = ("R_s", "R_c", "p", "sinr", "log10_ber", "distortion")
    header = labels + [f"{f}_{i}" for i in range(n_users) for f in per_user] + ["objective", "status"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in reports:
        if r is None:
            w.writerow([""] * (len(header) - 1) + ["failed"])
            continue
        row = [_fmt(r.label[k]) if k in r.label else "" for k in labels]
        a, m = r.allocation, r.metrics
        for i in range(n_users):
            row += [_fmt(a.source_rates[i]), _fmt(a.channel_rates[i]), _fmt(a.powers[i]),
                    _fmt(m.sinr[i]), _fmt(m.log10_ber[i]), _fmt(m.distortion[i])]
        row += [_fmt(r.objective), "ok" if r.failure is None else "failed"]
        w.writerow(row)
    return buf.getvalue()


def summary(report: SolverReport, title: str = "") -> str:
    a, m = report.allocation, report.metrics
    lines = [title] if title else []
    for i in range(a.powers.size):
        lines.append(
            f"user {i}: R_s={a.source_rates[i]:.6g} R_c={a.channel_rates[i]:.4f} "
            f"p={a.powers[i]:.4f} W sinr={m.sinr[i]:.4f} log10BER={m.log10_ber[i]:.3f} "
            f"D={m.distortion[i]:.5f}")
    lines.append(f"weighted distortion: {report.objective:.6f}")
    if report.discretization_delta is not None:
        lines.append(f"continuous objective: {report.continuous_objective:.6f} "
                     f"(discretisation delta {report.discretization_delta:+.3g})")
    if report.failure:
        lines.append(f"FAILURE: {report.failure}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# instance validation


def validate_scenario(scenario: Scenario, n_beams: int = 1000) -> list[tuple[str, bool, str]]:
    """Run the structural invariants on one scenario instance."""
    from .channel import (downlink_to_uplink_power, log10_ber, q_argument, sinr_uplink,
                          uplink_to_downlink_power)
    cfg = scenario.system
    rng = np.random.default_rng(scenario.solver.seed)
    out = []
    p = np.full(cfg.n_users, cfg.p_max / cfg.n_users)
    w = matched_filter(cfg)

    q = downlink_to_uplink_power(cfg, w, p)
    p2 = uplink_to_downlink_power(cfg, w, q)
    g_d = sinr_downlink(cfg, powers=p, beams=w)
    g_u = sinr_uplink(cfg, q, w)
    err = float(np.max(np.abs(g_d - g_u) / g_d))
    out.append(("duality SINR preservation", err <= 1e-8, f"max rel err {err:.2e}"))
    err = float(abs(q.sum() - p.sum()) / p.sum())
    out.append(("duality power conservation", err <= 1e-9, f"rel err {err:.2e}"))
    err = float(np.max(np.abs(p2 - p)))
    out.append(("duality round trip", err <= 1e-8, f"max abs err {err:.2e}"))

    wm = pb.mmse_beam(cfg, q)
    g_m = sinr_uplink(cfg, q, wm)
    worst = np.inf
    for _ in range(n_beams):
        z = rng.standard_normal((cfg.n_tx, cfg.n_users)) + 1j * rng.standard_normal((cfg.n_tx, cfg.n_users))
        z /= np.linalg.norm(z, axis=0)
        worst = min(worst, float(np.min(g_m - sinr_uplink(cfg, q, z))))
    out.append(("MMSE beams maximise uplink SINR", worst >= -1e-9, f"min margin {worst:.3e}"))

    # ties can only come from Q rounding to 1 in float64 (argument below about -8.2)
    gammas = np.logspace(-2, 4, 400)
    rises = ties = unexplained = 0
    for i, tab in enumerate(scenario.tables):
        rc = tab.r_min / cfg.delay_caps[i]
        b = np.array([log10_ber(gm, rc, cfg.blocklength) for gm in gammas])
        d = np.diff(b)
        rises += int(np.sum(d > 0))
        tie = np.nonzero(d == 0)[0]
        ties += tie.size
        unexplained += sum(q_argument(gammas[j + 1], rc, cfg.blocklength) > -8.0 for j in tie)
    out.append(("log-BER decreasing in SINR", rises == 0 and unexplained == 0,
                f"{rises} increases, {ties} float64 ties where Q rounds to 1, "
                f"{unexplained} other ties"))

    rs = np.array([t.rates[len(t.rates) // 2] for t in scenario.tables])
    rates = (rs, rs / cfg.delay_caps)
    theta = pb.anchor_point(cfg, rates, scenario.tables, q, wm)
    users = pb.user_models(cfg, rates, scenario.tables)
    lhs = pb.true_constraint_lhs(cfg, users, wm, theta)
    # t is stored exp-clipped; those entries of the first family are not comparable
    clipped = np.abs(np.log(theta.t)) >= pb._EXP_CLIP
    keep = np.ones(lhs.size, dtype=bool)
    keep[:cfg.n_users] = ~clipped
    err = float(np.max(np.abs(lhs[keep])))
    out.append(("slack constraints tight at anchor", err <= 1e-8,
                f"max |lhs| {err:.2e} ({int(clipped.sum())} clipped t entries skipped)"))
    return out
