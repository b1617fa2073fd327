"""
Structural checks on a scenario
===============================

Uplink-downlink duality, MMSE optimality and the tightness of the
convexified constraints, run on the reference scenario.
"""

import numpy as np

from jointalloc import golden_scenario, mmse_beam, sinr_downlink, sinr_uplink
from jointalloc import uplink_to_downlink_power
from jointalloc.driver import validate_scenario

sc = golden_scenario(256)
cfg = sc.system

####################################################################
# Duality by hand
# ---------------
# The downlink powers reproduce the uplink SINRs with the same total.

q = np.array([1.2, 1.8])
w = mmse_beam(cfg, q)
p = uplink_to_downlink_power(cfg, w, q)
print("uplink SINR  ", sinr_uplink(cfg, q, w))
print("downlink SINR", sinr_downlink(cfg, powers=p, beams=w))
print(f"total power {q.sum():.6f} -> {p.sum():.6f}")

####################################################################
# All checks
# ----------

for name, ok, detail in validate_scenario(sc, n_beams=200):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
