"""Command line entry point (``jointalloc``)."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import driver
from .distortion import DistortionTable, fit_logistic, read_samples_csv
from .errors import BaselineInapplicableError, ConfigurationError, FitError
from .link_sim import run_simulation


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def parse_grid(text: str) -> np.ndarray:
    """``a:b:n`` -> n evenly spaced values; otherwise a comma separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"grid must be a:b:n, got {text!r}")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise argparse.ArgumentTypeError("grid needs at least one point")
        return np.linspace(a, b, n)
    return np.array([float(x) for x in text.split(",")])


def parse_weight_grid(text: str, n_users: int) -> list[np.ndarray]:
    """Weight vectors separated by ``;``, or ``a:b:n`` for (w, 1-w) pairs when K=2."""
    if ":" in text:
        if n_users != 2:
            raise ConfigurationError("a:b:n weight grids only apply to two users")
        return [np.array([w, 1.0 - w]) for w in parse_grid(text)]
    out = []
    for chunk in text.split(";"):
        vec = np.array([float(x) for x in chunk.split(",")])
        if vec.size != n_users:
            raise ConfigurationError(f"weight vector {chunk!r} needs {n_users} entries")
        out.append(vec)
    return out


def _load(args) -> driver.Scenario:
    sc = driver.load_scenario(args.scenario)
    if getattr(args, "multistart", False):
        sc = dataclasses.replace(sc, solver=dataclasses.replace(sc.solver, multistart=True))
    return sc


def _emit(args, reports, scenario):
    csv_text = driver.reports_to_csv(reports, scenario.system.n_users)
    if args.csv:
        write_atomic(args.csv, csv_text)
    return csv_text


def cmd_solve(args) -> int:
    sc = _load(args)
    rep = driver.jrpb_solve(sc)
    print(driver.summary(rep, f"JRPB solution for {sc.name}"))
    _emit(args, [rep], sc)
    return 0 if rep.failure is None else 2


def cmd_baseline(args) -> int:
    sc = driver.load_scenario(args.scenario)
    rc = None if args.rc is None else [float(x) for x in args.rc.split(",")]
    rep = driver.zf_waterfilling_baseline(sc, rc)
    print(driver.summary(rep, f"ZF + waterfilling baseline for {sc.name}"))
    _emit(args, [rep], sc)
    return 0


def cmd_sweep_power(args) -> int:
    sc = _load(args)
    reports = driver.sweep_power(sc, parse_grid(args.grid))
    for r in reports:
        if r is not None:
            print(f"p_max={r.label['p_max']:.6g} W  objective={r.objective:.6f}")
    _emit(args, reports, sc)
    return 0 if all(r is not None for r in reports) else 2


def cmd_sweep_weights(args) -> int:
    sc = _load(args)
    reports = driver.sweep_weights(sc, parse_weight_grid(args.grid, sc.system.n_users))
    for r in reports:
        if r is not None:
            w = ",".join(f"{v:.4g}" for v in r.label.values())
            d = ",".join(f"{v:.6f}" for v in r.metrics.distortion)
            print(f"weights=({w})  distortions=({d})")
    _emit(args, reports, sc)
    return 0 if all(r is not None for r in reports) else 2


def cmd_fit(args) -> int:
    if len(args.floor) not in (1, len(args.samples)):
        raise ConfigurationError("give one --floor, or one per samples file")
    floors = args.floor * len(args.samples) if len(args.floor) == 1 else args.floor
    rows = []
    for i, (path, floor) in enumerate(zip(args.samples, floors)):
        fit = fit_logistic(read_samples_csv(path), floor)
        print(f"{path}: floor={fit.floor:.6g} span={fit.span:.6g} slope={fit.slope:.6g} "
              f"midpoint={fit.midpoint:.6g} mse={fit.mse:.3e}")
        if args.rate:
            rows.append(fit.row(args.rate[i]))
    if args.out:
        if len(args.rate or []) != len(args.samples):
            raise ConfigurationError("--out needs one --rate per samples file")
        table = DistortionTable(args.kind, tuple(sorted(rows, key=lambda r: r.rate)))
        table.save(args.out)
        print(f"wrote {args.kind} table with {len(rows)} rows to {args.out}")
    return 0


def cmd_validate(args) -> int:
    sc = driver.load_scenario(args.scenario)
    results = driver.validate_scenario(sc)
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def cmd_simulate(args) -> int:
    run = run_simulation(args.gamma, args.rc, args.blocklength, args.packets, args.seed)
    model = run.packet_error_prob / (args.rc * args.blocklength)
    print(f"packets={run.trials} failures={run.packet_failures} ber={run.ber:.6e} "
          f"model={model:.6e} stderr={run.standard_error:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jointalloc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("scenario", help="scenario JSON file or builtin:golden_L256 / builtin:golden_L4096")
        p.add_argument("--csv", help="write the CSV report here")
        p.set_defaults(func=fn)
        return p

    solvers = [scenario_cmd("solve", cmd_solve, "run the alternating solver")]
    p = scenario_cmd("sweep-power", cmd_sweep_power, "solve over a grid of power budgets")
    p.add_argument("--grid", required=True, help="a:b:n or comma list, in watts")
    solvers.append(p)
    p = scenario_cmd("sweep-weights", cmd_sweep_weights, "solve over a grid of user weights")
    p.add_argument("--grid", required=True, help="'w1,w2;w1,w2;...' or a:b:n for (w, 1-w)")
    solvers.append(p)
    for p in solvers:
        p.add_argument("--multistart", action="store_true",
                       help="start the rate search from every tabulated rate")
    p = scenario_cmd("baseline", cmd_baseline, "zero-forcing beams with waterfilled powers")
    p.add_argument("--rc", help="fixed channel rates, comma separated (default: optimise rates)")

    p = sub.add_parser("fit", help="fit logistic distortion rows to sample CSVs")
    p.add_argument("samples", nargs="+", help="CSV files with log10_ber,distortion columns")
    p.add_argument("--floor", type=float, action="append", required=True)
    p.add_argument("--rate", type=float, action="append", help="source rate of each file")
    p.add_argument("--kind", choices=("data", "semantic"), default="data")
    p.add_argument("--out", help="write a distortion table JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="check structural invariants on a scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="Monte-Carlo packet/bit error check")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--rc", type=float, required=True)
    p.add_argument("--blocklength", type=int, required=True)
    p.add_argument("--packets", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, BaselineInapplicableError, FitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
