"""
Fitting logistic distortion curves
==================================

Generate noisy (log10 BER, distortion) samples from a known curve, recover
its parameters, and assemble a small distortion table.
"""

import numpy as np

from jointalloc import DistortionTable, LogisticRow, fit_logistic, synthetic_table
from jointalloc.distortion import e2e_distortion
from jointalloc.link_sim import generate_fit_dataset

####################################################################
# One row
# -------
# The floor is the error-free distortion and is held fixed; span,
# slope and midpoint are fitted.

truth = LogisticRow(rate=9600.0, floor=0.05, span=0.4, slope=3.0, midpoint=-4.0)
grid = np.linspace(-9, -1, 40)
samples = generate_fit_dataset(truth, grid, noise_sigma=0.005, seed=1)
fit = fit_logistic(samples, truth.floor)
print(f"fitted span={fit.span:.4f} slope={fit.slope:.4f} midpoint={fit.midpoint:.4f} "
      f"(mse {fit.mse:.2e})")

####################################################################
# A table from several rows
# -------------------------
# Higher source rates get a lower floor but break down earlier.

rows = []
for rate, floor, mid in [(4800, 0.12, -3.0), (9600, 0.07, -3.6), (19200, 0.03, -4.3)]:
    row = LogisticRow(rate, floor, 0.5, 2.5, mid)
    f = fit_logistic(generate_fit_dataset(row, grid, 0.005, seed=int(rate)), floor)
    rows.append(f.row(rate))
table = DistortionTable("data", tuple(rows))
for ber in (-8, -5, -3, -1):
    vals = " ".join(f"{e2e_distortion(table, r, ber):.3f}" for r in (4800, 7200, 9600, 19200))
    print(f"log10 BER {ber:>3}: {vals}")

####################################################################
# Built-in tables
# ---------------
# The package ships synthetic tables for both user kinds.

for kind in ("data", "semantic"):
    t = synthetic_table(kind)
    print(f"{kind:>8}: {len(t.rows)} rates from {t.rates[0]:.0f} to {t.rates[-1]:.0f}")
