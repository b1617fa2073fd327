"""Joint rate, power and beamforming allocation for a multi-user MISO downlink.

Users are either data users (reconstruct the source) or semantic users (run a
task on it).  Each user's end-to-end distortion is modelled by a logistic
curve in log10 bit error rate whose parameters depend on the source rate;
the bit error rate follows the finite-blocklength normal approximation.
"""

from .channel import (DATA, SEMANTIC, Allocation, LinkMetrics, SystemConfig, log10_ber,
                      packet_error, sinr_downlink, sinr_uplink, downlink_to_uplink_power,
                      uplink_to_downlink_power)
from .distortion import DistortionTable, LogisticRow, e2e_distortion, fit_logistic, synthetic_table
from .driver import (Scenario, SolverReport, SolverSettings, golden_scenario, jrpb_solve,
                     load_scenario, sweep_power, sweep_weights, zf_waterfilling_baseline)
from .errors import (BaselineInapplicableError, ConfigurationError, DualityInfeasibleError,
                     FitError, InfeasibleError, RateRangeError, SCAError)
from .link_sim import simulate_ber
from .power_beam import joint_power_beam, mmse_beam, sca_power
from .rate_opt import optimize_rate

__version__ = "0.1.0"

__all__ = [
    "DATA", "SEMANTIC", "Allocation", "LinkMetrics", "SystemConfig", "log10_ber", "packet_error",
    "sinr_downlink", "sinr_uplink", "downlink_to_uplink_power", "uplink_to_downlink_power",
    "DistortionTable", "LogisticRow", "e2e_distortion", "fit_logistic", "synthetic_table",
    "Scenario", "SolverReport", "SolverSettings", "golden_scenario", "jrpb_solve", "load_scenario",
    "sweep_power", "sweep_weights", "zf_waterfilling_baseline", "BaselineInapplicableError",
    "ConfigurationError", "DualityInfeasibleError", "FitError", "InfeasibleError",
    "RateRangeError", "SCAError", "simulate_ber", "joint_power_beam", "mmse_beam", "sca_power",
    "optimize_rate",
]
