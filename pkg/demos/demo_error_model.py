"""
Bit error rate from the finite-blocklength normal approximation
===============================================================

How the per-user log10 BER reacts to SINR, channel rate and blocklength,
and a Monte-Carlo sanity check of the packet-to-bit conversion.
"""

import numpy as np

from jointalloc import log10_ber, packet_error
from jointalloc.link_sim import run_simulation

####################################################################
# Sweep the SINR
# --------------
# Longer blocks sharpen the waterfall around the SINR where capacity
# equals the channel rate (gamma = 2**R_c - 1).

gammas = np.logspace(-1, 2, 13)
print(f"{'gamma':>9} " + " ".join(f"L={L:>5}" for L in (256, 1024, 4096)))
for g in gammas:
    row = " ".join(f"{log10_ber(g, 1.8, L):7.2f}" for L in (256, 1024, 4096))
    print(f"{g:9.3f} {row}")

####################################################################
# Packet error at capacity
# ------------------------
# Exactly at capacity the Q-function argument is zero, so half the
# packets fail whatever the blocklength.

for L in (256, 4096):
    print(f"L={L}: packet error at gamma=2**1.8-1 is {packet_error(2**1.8 - 1, 1.8, L):.6f}")

####################################################################
# Monte-Carlo check
# -----------------
# One bit error is charged per failed packet, so the empirical BER
# should sit within a few standard errors of rho / (R_c L).

for seed in range(3):
    run = run_simulation(3.0, 2.0, 256, 1_000_000, seed)
    model = run.packet_error_prob / (2.0 * 256)
    print(f"seed {seed}: ber={run.ber:.4e} model={model:.4e} "
          f"z={(run.ber - model) / run.standard_error:+.2f}")
