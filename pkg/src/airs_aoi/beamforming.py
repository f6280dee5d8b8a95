"""Closed-form active/passive beamforming for the single-stream IRS link."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import GeometryError, PhaseGeometry, geometry_for, steering_vector
from .config import ScenarioConfig

TWO_PI = 2.0 * np.pi


def wrap_phase(theta) -> np.ndarray:
    """Map phases into ``[0, 2*pi)``; guards the ``mod`` result rounding up to ``2*pi``."""
    out = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


def mrt_beamformer(geom: PhaseGeometry, m_x: int, m_z: int, p_k: float) -> np.ndarray:
    """MRT precoder ``sqrt(P_k) * a_T1 / sqrt(M)`` aligned with the BS transmit steering."""
    if p_k < 0:
        raise ValueError(f"allocated power must be nonnegative, got {p_k}")
    a_T1 = steering_vector(geom.phi_t1x, geom.phi_t1z, m_x, m_z)
    return np.sqrt(p_k) * a_T1 / np.sqrt(m_x * m_z)


def _phase_offsets(geom: PhaseGeometry, n_sx: int, n_sy: int) -> np.ndarray:
    mu_x = np.arange(n_sx) * (geom.phi_t2x - geom.phi_r1x)
    mu_y = np.arange(n_sy) * (geom.phi_t2y - geom.phi_r1y)
    return (mu_x[:, None] + mu_y[None, :]).reshape(-1)


def array_gain(theta, geom: PhaseGeometry, n_sx: int, n_sy: int) -> float:
    """Modulus of the coherent IRS sum ``|sum exp(j(theta + mu_x + mu_y))|``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n_sx * n_sy,):
        raise ValueError(f"theta has length {theta.size}, expected {n_sx * n_sy}")
    return float(abs(np.exp(1j * (theta + _phase_offsets(geom, n_sx, n_sy))).sum()))


def optimal_phases(geom: PhaseGeometry, n_sx: int, n_sy: int, wavelength: float,
                   d_x: float, d_y: float) -> np.ndarray:
    """Phase shifts that co-phase every reflected path, ``theta = -(mu_x + mu_y)``.

    Evaluated from the link angles directly; both axis terms carry the same sign
    (that is what makes the array gain reach ``N_s``).
    """
    cx = np.sin(geom.eta_t2) * np.cos(geom.varphi_t2) - np.sin(geom.eta_r1) * np.cos(geom.varphi_r1)
    cy = np.sin(geom.eta_t2) * np.sin(geom.varphi_t2) - np.sin(geom.eta_r1) * np.sin(geom.varphi_r1)
    k0 = TWO_PI / wavelength
    tx = d_x * np.arange(n_sx) * cx
    ty = d_y * np.arange(n_sy) * cy
    theta = -k0 * (tx[:, None] + ty[None, :]).reshape(-1)
    return wrap_phase(theta)


def closed_form_snr(q, c, l_k, cfg: ScenarioConfig) -> float:
    """SNR with MRT and optimal phases: ``rho_o^2 d_o^4 P_o N_s^2 M / (|q-l_k|^2 |q-c|^2 sigma^2)``."""
    q = np.asarray(q, dtype=float)
    d_rk2 = float(np.sum((q - np.asarray(l_k, dtype=float)) ** 2))
    d_br2 = float(np.sum((q - np.asarray(c, dtype=float)) ** 2))
    if d_rk2 <= 0 or d_br2 <= 0:
        raise GeometryError("closed-form SNR undefined for coincident points")
    return cfg.snr_constant / (d_rk2 * d_br2)


def closed_form_snr_all(q, cfg: ScenarioConfig) -> np.ndarray:
    """Vector of closed-form SNRs for every user at IRS position ``q``."""
    q = np.asarray(q, dtype=float)
    d_rk2 = np.sum((cfg.user_positions - q) ** 2, axis=1)
    d_br2 = float(np.sum((q - cfg.bs_position) ** 2))
    if np.any(d_rk2 <= 0) or d_br2 <= 0:
        raise GeometryError("closed-form SNR undefined for coincident points")
    return cfg.snr_constant / (d_rk2 * d_br2)


@dataclass
class SlotDecision:
    """Committed per-slot decision: binary schedule, IRS position and beamformers.

    ``w`` and ``theta`` serve the scheduled stream; with nobody scheduled they are
    all-zero (no transmission, default phases).
    """

    alpha: np.ndarray
    q: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    alpha_relaxed: np.ndarray | None = None

    @property
    def stream(self) -> int | None:
        idx = np.flatnonzero(self.alpha)
        return int(idx[0]) if idx.size else None


def make_decision(cfg: ScenarioConfig, q, alpha, alpha_relaxed=None) -> SlotDecision:
    """Attach MRT (full power ``P_o``) and co-phasing IRS shifts to a binary schedule."""
    q = np.asarray(q, dtype=float)
    alpha = np.asarray(alpha, dtype=np.int64)
    w = np.zeros(cfg.M, dtype=complex)
    theta = np.zeros(cfg.N_s)
    if alpha.sum():
        k = int(np.flatnonzero(alpha)[0])
        geom = geometry_for(cfg, q, k)
        w = mrt_beamformer(geom, cfg.m_x, cfg.m_z, cfg.p_o)
        theta = optimal_phases(geom, cfg.n_sx, cfg.n_sy, cfg.wavelength, cfg.d_x, cfg.d_y)
    return SlotDecision(alpha=alpha, q=q, w=w, theta=theta, alpha_relaxed=alpha_relaxed)
