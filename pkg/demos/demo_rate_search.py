"""
Choosing a source rate for one user
===================================

For a fixed SINR the distortion is a one-dimensional function of the
source rate.  Low rates leave quality on the table; high rates force a
high channel rate and the link breaks.
"""

import numpy as np

from jointalloc import optimize_rate, synthetic_table
from jointalloc.rate_opt import objective_at

table = synthetic_table("semantic")
cap, L = 6999.2, 256

####################################################################
# The landscape
# -------------

for gamma in (2.0, 6.0, 20.0):
    rs = np.linspace(table.rates[0], table.rates[-1], 9)
    vals = " ".join(f"{objective_at(table, gamma, cap, L, r):.3f}" for r in rs)
    print(f"gamma={gamma:5.1f}: {vals}")

####################################################################
# Subgradient search
# ------------------
# The search works on the continuous rate; the driver rounds down to
# a tabulated rate afterwards.

for gamma in (2.0, 6.0, 20.0):
    sol = optimize_rate(table, gamma, cap, L)
    print(f"gamma={gamma:5.1f}: R_s={sol.source_rate:8.1f} R_c={sol.channel_rate:.3f} "
          f"D={sol.objective:.4f} after {sol.iterations} iterations")
