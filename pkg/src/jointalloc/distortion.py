"""Logistic end-to-end distortion models indexed by source coding rate.

Each pre-trained codec contributes one :class:`LogisticRow`:

    D(rho) = floor + span / (1 + exp(-slope * (rho - midpoint)))

where ``rho`` is the base-10 log of the bit error rate.  Between tabulated
rates every parameter is interpolated linearly, which turns the discrete model
set into a function of a continuous source rate.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.special import expit

from .channel import DATA, KINDS, SEMANTIC
from .errors import ConfigurationError, FitError, RateRangeError

PARAMS = ("floor", "span", "slope", "midpoint")


@dataclass(frozen=True)
class LogisticRow:
    rate: float
    floor: float
    span: float
    slope: float
    midpoint: float

    def __post_init__(self):
        if not self.slope > 0:
            raise ConfigurationError(f"slope must be positive, got {self.slope}")
        if self.span < 0:
            raise ConfigurationError(f"span must be nonnegative, got {self.span}")
        if self.floor + self.span > 1.0 + 1e-9:
            raise ConfigurationError("floor + span exceeds 1 for a normalised metric")

    def params(self) -> np.ndarray:
        return np.array([self.floor, self.span, self.slope, self.midpoint])


@dataclass(frozen=True)
class DistortionTable:
    """Logistic rows for one task kind, strictly ascending in rate."""

    kind: str
    rows: tuple[LogisticRow, ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"table kind must be one of {KINDS}")
        rows = tuple(self.rows)
        if len(rows) < 2:
            raise ConfigurationError("a distortion table needs at least two rows")
        rates = np.array([r.rate for r in rows])
        if np.any(np.diff(rates) <= 0):
            raise ConfigurationError("table rows must be strictly ascending in rate")
        object.__setattr__(self, "rows", rows)
        floors = np.array([r.floor for r in rows])
        if np.any(np.diff(floors) > 0):
            warnings.warn(f"{self.kind} table floors are not non-increasing in rate",
                          stacklevel=2)

    @property
    def rates(self) -> np.ndarray:
        return np.array([r.rate for r in self.rows])

    @property
    def r_min(self) -> float:
        return self.rows[0].rate

    @property
    def r_max(self) -> float:
        return self.rows[-1].rate

    def param_matrix(self) -> np.ndarray:
        """Rows x (floor, span, slope, midpoint)."""
        return np.array([r.params() for r in self.rows])

    def round_down(self, r_s: float) -> float:
        """Largest tabulated rate not above ``r_s`` (the lowest rate if none)."""
        rates = self.rates
        idx = np.searchsorted(rates, r_s * (1 + 1e-12), side="right") - 1
        return float(rates[max(idx, 0)])

    # -- serialisation --------------------------------------------------
    def to_dict(self) -> dict:
        d = {"kind": self.kind, "rows": [asdict(r) for r in self.rows]}
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DistortionTable":
        rows = tuple(LogisticRow(**{k: float(row[k]) for k in ("rate",) + PARAMS})
                     for row in d["rows"])
        return cls(kind=d["kind"], rows=rows, meta=dict(d.get("meta", {})))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "DistortionTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def evaluate(row: LogisticRow, log10_ber: float) -> float:
    return row.floor + row.span * float(expit(row.slope * (log10_ber - row.midpoint)))


def _bracket(table: DistortionTable, r_s: float) -> tuple[int, float]:
    rates = table.rates
    if not (rates[0] <= r_s <= rates[-1]):
        raise RateRangeError(
            f"source rate {r_s} outside table range [{rates[0]}, {rates[-1]}]")
    n = int(np.searchsorted(rates, r_s, side="right")) - 1
    n = min(n, len(rates) - 2)
    lam = (r_s - rates[n]) / (rates[n + 1] - rates[n])
    return n, lam


def interpolate(table: DistortionTable, r_s: float) -> LogisticRow:
    """Linearly blend the two rows bracketing ``r_s``."""
    n, lam = _bracket(table, r_s)
    lo, hi = table.rows[n], table.rows[n + 1]
    if lam == 0.0:
        return lo
    if lam == 1.0:
        return hi
    p = lo.params() + lam * (hi.params() - lo.params())
    return LogisticRow(float(r_s), *map(float, p))


def segment_slopes(table: DistortionTable, segment: int) -> np.ndarray:
    """d(floor, span, slope, midpoint)/d(rate) on ``[R^n, R^{n+1}]``."""
    lo, hi = table.rows[segment], table.rows[segment + 1]
    return (hi.params() - lo.params()) / (hi.rate - lo.rate)


def e2e_distortion(table: DistortionTable, r_s: float, log10_ber: float) -> float:
    return evaluate(interpolate(table, r_s), log10_ber)


def interpolation_gaps(table: DistortionTable, ber_grid: Sequence[float]) -> np.ndarray:
    """Leave-one-out interpolation error at each interior row.

    For every interior row ``n`` the row is dropped, re-predicted from its
    neighbours and compared on ``ber_grid``; returns the max absolute error
    per interior row.
    """
    grid = np.asarray(ber_grid, dtype=float)
    out = []
    for n in range(1, len(table.rows) - 1):
        reduced = DistortionTable(table.kind, table.rows[:n] + table.rows[n + 1:])
        guess = interpolate(reduced, table.rows[n].rate)
        truth = table.rows[n]
        err = max(abs(evaluate(guess, b) - evaluate(truth, b)) for b in grid)
        out.append(err)
    return np.array(out)


# ---------------------------------------------------------------------------
# regression


@dataclass(frozen=True)
class LogisticFit:
    floor: float
    span: float
    slope: float
    midpoint: float
    mse: float
    nfev: int

    def row(self, rate: float) -> LogisticRow:
        return LogisticRow(rate, self.floor, self.span, self.slope, self.midpoint)


def _initial_guess(x: np.ndarray, y: np.ndarray, floor: float) -> np.ndarray:
    span0 = float(y.max() - floor)
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    half = floor + 0.5 * span0
    above = np.nonzero(ys >= half)[0]
    if above.size == 0 or above[0] == 0:
        mid0 = float(np.median(xs))
    else:
        j = above[0]
        x0, x1, y0, y1 = xs[j - 1], xs[j], ys[j - 1], ys[j]
        mid0 = float(x0 + (half - y0) * (x1 - x0) / (y1 - y0)) if y1 != y0 else float(x1)
    return np.array([max(span0, 1e-6), 2.0, mid0])


def fit_logistic(samples: Iterable[Sequence[float]], floor: float) -> LogisticFit:
    """Least-squares fit of ``(span, slope, midpoint)`` with a known floor.

    Uses Levenberg-Marquardt with the analytic Jacobian from a fixed
    initialisation, so the result is a deterministic function of the samples.
    """
    data = np.asarray(list(samples), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise FitError("samples must be (log10_ber, distortion) pairs")
    if data.shape[0] < 4:
        raise FitError("at least 4 samples are needed")
    x, y = data[:, 0], data[:, 1]
    if np.ptp(y) <= 1e-12:
        raise FitError("samples have constant distortion; logistic is unidentifiable")

    def resid(theta):
        span, slope, mid = theta
        return floor + span * expit(slope * (x - mid)) - y

    def jac(theta):
        span, slope, mid = theta
        s = expit(slope * (x - mid))
        ds = s * (1.0 - s)
        return np.column_stack([s, span * ds * (x - mid), -span * ds * slope])

    theta0 = _initial_guess(x, y, floor)
    res = least_squares(resid, theta0, jac=jac, method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    span, slope, mid = res.x
    if not np.all(np.isfinite(res.x)):
        raise FitError("fit diverged")
    if slope < 0:
        # the logistic is symmetric under (span, slope) -> (-span, -slope) only
        # with a shifted floor, so a negative slope means the data decrease
        raise FitError("fitted slope is negative; distortion must rise with BER")
    mse = float(np.mean(res.fun ** 2))
    return LogisticFit(float(floor), float(span), float(slope), float(mid), mse, int(res.nfev))


def read_samples_csv(path) -> np.ndarray:
    """Read ``log10_ber,distortion`` rows (a header line is optional)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                continue  # header
    return np.array(rows, dtype=float)


def write_samples_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["log10_ber", "distortion"])
        for b, d in np.asarray(samples, dtype=float):
            w.writerow([repr(float(b)), repr(float(d))])


# ---------------------------------------------------------------------------
# synthetic stand-ins for trained codecs


def synthetic_table(kind: str, rates: Sequence[float] | None = None) -> DistortionTable:
    """A smooth table with the qualitative shape of measured codec curves.

    Floors fall with rate; channel-error thresholds (midpoints) also fall with
    rate, i.e. low-rate codecs tolerate higher bit error rates.
    """
    if rates is None:
        rates = np.geomspace(2400.0, 28000.0, 12)
    rates = np.asarray(rates, dtype=float)
    u = (np.log(rates) - np.log(rates[0])) / (np.log(rates[-1]) - np.log(rates[0]))
    if kind == DATA:
        floors = 0.02 + 0.16 * (1.0 - u) ** 1.6
        ceiling = 0.80
        slopes = 2.4 + 0.6 * u
        mids = -4.6 - 1.4 * u
    elif kind == SEMANTIC:
        floors = 0.20 + 0.38 * (1.0 - u) ** 1.3
        ceiling = 0.995
        slopes = 3.0 + 0.4 * u
        mids = -4.2 - 1.2 * u
    else:
        raise ConfigurationError(f"unknown kind {kind!r}")
    rows = tuple(LogisticRow(float(r), float(f), float(ceiling - f), float(a), float(m))
                 for r, f, a, m in zip(rates, floors, slopes, mids))
    return DistortionTable(kind, rows, meta={"source": "synthetic", "generator": "synthetic_table"})
