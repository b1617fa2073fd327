"""Monte-Carlo checks of the packet-to-bit error conversion and fit datasets.

A failed packet is charged exactly one bit error among its ``R_c * L``
message bits, which is the assumption under which the analytic log-BER is
an identity.  This harness therefore checks internal consistency of the
error model, not the behaviour of any concrete channel code.

Random draws come from ``numpy.random.default_rng(seed)`` (PCG64), so runs
are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channel import packet_error
from .distortion import LogisticRow, evaluate, write_samples_csv


@dataclass(frozen=True)
class SimRun:
    seed: int
    trials: int
    packet_failures: int
    bit_errors: int
    total_bits: float
    ber: float
    packet_error_prob: float
    mean_distortion: float | None = None

    @property
    def standard_error(self) -> float:
        """Binomial standard error of :attr:`ber` under the model."""
        p = self.packet_error_prob
        return float(np.sqrt(p * (1.0 - p) / self.trials) * self.trials / self.total_bits)


def run_simulation(gamma: float, r_c: float, blocklength: int, n_packets: int, seed: int,
                   distortion_oracle: Callable[[float], float] | None = None) -> SimRun:
    if n_packets < 1:
        raise ValueError("n_packets must be at least 1")
    rng = np.random.default_rng(seed)
    rho = packet_error(gamma, r_c, blocklength)
    failures = int(np.count_nonzero(rng.random(n_packets) < rho))
    bits_per_packet = r_c * blocklength
    total_bits = n_packets * bits_per_packet
    ber = failures / total_bits
    mean_d = None
    if distortion_oracle is not None:
        mean_d = float(distortion_oracle(np.log10(ber)) if ber > 0 else distortion_oracle(-np.inf))
    return SimRun(seed=seed, trials=n_packets, packet_failures=failures, bit_errors=failures,
                  total_bits=total_bits, ber=ber, packet_error_prob=rho, mean_distortion=mean_d)


def simulate_ber(gamma: float, r_c: float, blocklength: int, n_packets: int, seed: int) -> float:
    """Empirical bit error rate from ``n_packets`` Bernoulli packet outcomes."""
    return run_simulation(gamma, r_c, blocklength, n_packets, seed).ber


def generate_fit_dataset(row: LogisticRow, ber_grid: Sequence[float], noise_sigma: float,
                         seed: int, path=None) -> np.ndarray:
    """Noisy ``(log10_ber, distortion)`` samples from a logistic row.

    Written to ``path`` as CSV when given.
    """
    grid = np.asarray(ber_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("ber_grid must not be empty")
    rng = np.random.default_rng(seed)
    clean = np.array([evaluate(row, b) for b in grid])
    noisy = clean + noise_sigma * rng.standard_normal(grid.size) if noise_sigma > 0 else clean
    samples = np.column_stack([grid, noisy])
    if path is not None:
        write_samples_csv(path, samples)
    return samples
