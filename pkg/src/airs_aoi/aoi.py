"""Per-slot Age-of-Information bookkeeping for K single-packet streams.

The recursions operate elementwise on integer numpy arrays (one entry per
stream) and equally on plain ints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ScheduleError(ValueError):
    """A schedule vector that is not binary or uses more than one channel."""


@dataclass
class AoiState:
    """AoI ``A``, queuing time ``z``, packet availability ``xi`` and this slot's arrivals ``p``."""

    A: np.ndarray
    z: np.ndarray
    xi: np.ndarray
    p: np.ndarray

    @property
    def K(self) -> int:
        return len(self.A)

    def copy(self) -> "AoiState":
        return AoiState(self.A.copy(), self.z.copy(), self.xi.copy(), self.p.copy())


def initial_state(p0) -> AoiState:
    """``A = 1``, ``z = 0`` and ``xi`` equal to the first slot's arrivals."""
    p0 = np.asarray(p0, dtype=np.int64)
    k = len(p0)
    return AoiState(A=np.ones(k, dtype=np.int64), z=np.zeros(k, dtype=np.int64),
                    xi=p0.copy(), p=p0.copy())


def draw_arrivals(epsilon, rng: np.random.Generator, n_slots: int | None = None) -> np.ndarray:
    """Independent Bernoulli(epsilon_k) arrival bits; shape ``(K,)`` or ``(n_slots, K)``."""
    eps = np.asarray(epsilon, dtype=float)
    if np.any((eps < 0) | (eps > 1)):
        raise ValueError("arrival probabilities must lie in [0, 1]")
    shape = eps.shape if n_slots is None else (n_slots,) + eps.shape
    return (rng.random(shape) < eps).astype(np.int64)


def step_xi(xi, alpha, p_next):
    """xi(n+1) = p(n+1) + xi(n) (1 - alpha(n)) (1 - p(n+1))."""
    return p_next + xi * (1 - alpha) * (1 - p_next)


def step_z(z, alpha_next):
    """Queuing time resets when the stream is scheduled, otherwise grows by one slot."""
    out = np.where(np.asarray(alpha_next) == 1, 0, np.asarray(z) + 1)
    return out if out.ndim else int(out)


def step_aoi(A, z, alpha, xi):
    """A(n+1) = z alpha xi + A (1 - alpha xi) + 1."""
    served = alpha * xi
    return z * served + A * (1 - served) + 1


def validate_schedule(alpha, xi, snr, gamma_th: float) -> np.ndarray:
    """Per-stream acceptance of the SNR requirement ``snr_k >= alpha_k xi_k gamma_th``.

    Raises ScheduleError for a non-binary vector or more than one scheduled stream.
    """
    alpha = np.asarray(alpha)
    xi = np.asarray(xi)
    snr = np.asarray(snr, dtype=float)
    if not (alpha.shape == xi.shape == snr.shape):
        raise ValueError("alpha, xi and snr must have equal lengths")
    if np.any((alpha != 0) & (alpha != 1)):
        raise ScheduleError(f"schedule must be binary, got {alpha}")
    if alpha.sum() > 1:
        raise ScheduleError(f"{int(alpha.sum())} streams scheduled in one slot")
    return snr >= alpha * xi * gamma_th
