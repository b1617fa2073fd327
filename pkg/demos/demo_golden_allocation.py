"""
Joint allocation on the two-user reference scenario
===================================================

A data user and a semantic user share a two-antenna transmitter.  The
alternating solver is compared with zero-forcing beams plus waterfilling,
then the power budget and the user weights are swept.
"""

import numpy as np

from jointalloc import golden_scenario, jrpb_solve, sweep_power, sweep_weights
from jointalloc import zf_waterfilling_baseline
from jointalloc.driver import summary

####################################################################
# One solve
# ---------

sc = golden_scenario(256)
rep = jrpb_solve(sc)
print(summary(rep, "alternating solver, L=256"))
base = zf_waterfilling_baseline(sc, [1.8, 1.3])
print(summary(base, "ZF + waterfilling, R_c=(1.8, 1.3)"))

####################################################################
# Power budget
# ------------
# More power never hurts; the sweep warm-starts from the previous point.

for r in sweep_power(sc, np.linspace(0.5, 8.0, 4)):
    print(f"P={r.label['p_max']:.2f} W  objective={r.objective:.5f}")

####################################################################
# Weights
# -------
# Each weight vector gives one point of the achievable distortion pair.

for r in sweep_weights(sc, [(1.0, 0.0), (0.5, 0.5), (0.0, 1.0)]):
    d = r.metrics.distortion
    print(f"weights={tuple(r.label.values())}  D_data={d[0]:.4f}  D_sem={d[1]:.4f}")
