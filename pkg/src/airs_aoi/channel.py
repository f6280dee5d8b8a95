"""3-D geometry, UPA steering vectors, free-space path loss and the cascaded
BS -> IRS -> user line-of-sight channel.

Angle convention: for a link direction ``u`` (unit vector) the elevation is
measured from the vertical, ``cos(eta) = u_z``, and the azimuth lives in the x-y
plane, ``phi = atan2(u_y, u_x)``. The BS->IRS link uses ``u = (q - c)/|q - c|``,
the IRS->user link ``u = (l_k - q)/|l_k - q|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig

_COINCIDENT_TOL = 1e-9


class GeometryError(ValueError):
    """Coincident or otherwise degenerate link endpoints."""


@dataclass(frozen=True)
class PhaseGeometry:
    """Link angles and per-element steering phase increments (radians)."""

    eta_r1: float
    varphi_r1: float
    eta_t2: float
    varphi_t2: float
    eta_t1: float
    varphi_t1: float
    phi_r1x: float
    phi_r1y: float
    phi_t2x: float
    phi_t2y: float
    phi_t1x: float
    phi_t1z: float


@dataclass(frozen=True)
class ChannelRealization:
    """Steering vectors, path gains and complex channels for one UAV position.

    ``h_rk[k]`` is the column vector whose Hermitian is the IRS->user row channel,
    i.e. the received signal is ``h_rk[k].conj() @ diag(e^{j theta}) @ G @ w``.
    """

    q: np.ndarray
    a_R1: np.ndarray  # (N_s,)
    a_T1: np.ndarray  # (M,)
    a_T2: np.ndarray  # (K, N_s)
    G: np.ndarray  # (N_s, M)
    h_rk: np.ndarray  # (K, N_s)
    rho_br: float
    rho_rk: np.ndarray  # (K,)
    d_br: float
    d_rk: np.ndarray  # (K,)
    geometry: tuple  # PhaseGeometry per user

    @property
    def N_s(self) -> int:
        return self.G.shape[0]

    @property
    def M(self) -> int:
        return self.G.shape[1]


def _direction(src, dst) -> tuple[np.ndarray, float]:
    d = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    norm = float(np.linalg.norm(d))
    if not np.isfinite(norm):
        raise GeometryError("non-finite coordinates")
    if norm <= _COINCIDENT_TOL:
        raise GeometryError(f"coincident points {src} and {dst}")
    return d / norm, norm


def direction_angles(u: np.ndarray) -> tuple[float, float]:
    """Elevation (from vertical) and azimuth of the unit vector ``u``."""
    eta = float(np.arccos(np.clip(u[2], -1.0, 1.0)))
    varphi = float(np.arctan2(u[1], u[0]))
    return eta, varphi


def compute_angles(q, c, l_k, *, wavelength: float, d_x: float, d_y: float,
                   d_ox: float, d_oz: float) -> PhaseGeometry:
    """Angles of the BS->IRS and IRS->user links seen from IRS corner ``q``.

    The BS departure angles equal the IRS arrival angles (same LoS direction).
    The BS array lies in the x-z plane, so its phase increments use the x and z
    direction cosines.
    """
    u_br, _ = _direction(c, q)
    u_rk, _ = _direction(q, l_k)
    eta_r1, varphi_r1 = direction_angles(u_br)
    eta_t2, varphi_t2 = direction_angles(u_rk)
    eta_t1, varphi_t1 = eta_r1, varphi_r1
    k0 = 2.0 * np.pi / wavelength
    return PhaseGeometry(
        eta_r1=eta_r1, varphi_r1=varphi_r1,
        eta_t2=eta_t2, varphi_t2=varphi_t2,
        eta_t1=eta_t1, varphi_t1=varphi_t1,
        phi_r1x=k0 * d_x * np.sin(eta_r1) * np.cos(varphi_r1),
        phi_r1y=k0 * d_y * np.sin(eta_r1) * np.sin(varphi_r1),
        phi_t2x=k0 * d_x * np.sin(eta_t2) * np.cos(varphi_t2),
        phi_t2y=k0 * d_y * np.sin(eta_t2) * np.sin(varphi_t2),
        phi_t1x=k0 * d_ox * np.sin(eta_t1) * np.cos(varphi_t1),
        phi_t1z=k0 * d_oz * np.cos(eta_t1),
    )


def geometry_for(cfg: ScenarioConfig, q, k: int) -> PhaseGeometry:
    return compute_angles(q, cfg.bs_position, cfg.user_positions[k],
                          wavelength=cfg.wavelength, d_x=cfg.d_x, d_y=cfg.d_y,
                          d_ox=cfg.d_ox, d_oz=cfg.d_oz)


def steering_vector(phase_x: float, phase_y: float, n_a: int, n_b: int) -> np.ndarray:
    """Kronecker-ordered UPA response; entry ``i*n_b + j`` is ``exp(-j(i*phase_x + j*phase_y))``."""
    if n_a < 1 or n_b < 1:
        raise ValueError("array dimensions must be >= 1")
    ax = np.exp(-1j * phase_x * np.arange(n_a))
    ay = np.exp(-1j * phase_y * np.arange(n_b))
    return np.kron(ax, ay)


def path_loss(d: float, rho_o: float, d_o: float) -> float:
    """Free-space gain ``rho_o * d_o**2 / d**2``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise GeometryError("path loss needs a strictly positive distance")
    return rho_o * d_o**2 / d**2


def build_channels(cfg: ScenarioConfig, q) -> ChannelRealization:
    q = np.asarray(q, dtype=float)
    if q.shape != (3,):
        raise GeometryError("q must be a 3-vector")
    if q[2] != cfg.altitude:
        raise GeometryError(f"IRS altitude {q[2]} differs from configured {cfg.altitude}")
    c = cfg.bs_position
    users = cfg.user_positions
    _, d_br = _direction(c, q)
    rho_br = float(path_loss(d_br, cfg.rho_o, cfg.d_o))

    geoms = tuple(geometry_for(cfg, q, k) for k in range(cfg.K))
    g0 = geoms[0]
    a_R1 = steering_vector(g0.phi_r1x, g0.phi_r1y, cfg.n_sx, cfg.n_sy)
    a_T1 = steering_vector(g0.phi_t1x, g0.phi_t1z, cfg.m_x, cfg.m_z)
    G = (np.sqrt(rho_br) * np.exp(-2j * np.pi * d_br / cfg.wavelength)
         * np.outer(a_R1, a_T1.conj()))

    d_rk = np.linalg.norm(users - q, axis=1)
    rho_rk = path_loss(d_rk, cfg.rho_o, cfg.d_o)
    a_T2 = np.stack([steering_vector(g.phi_t2x, g.phi_t2y, cfg.n_sx, cfg.n_sy) for g in geoms])
    # h^H = sqrt(rho) e^{-j2pi d/lambda} a^H  <=>  h = sqrt(rho) e^{+j2pi d/lambda} a
    h_rk = (np.sqrt(rho_rk) * np.exp(2j * np.pi * d_rk / cfg.wavelength))[:, None] * a_T2

    return ChannelRealization(q=q.copy(), a_R1=a_R1, a_T1=a_T1, a_T2=a_T2, G=G, h_rk=h_rk,
                              rho_br=rho_br, rho_rk=rho_rk, d_br=d_br, d_rk=d_rk,
                              geometry=geoms)


def brute_force_snr(ch: ChannelRealization, k: int, theta, w, sigma2: float,
                    p_max: float | None = None) -> float:
    """Received SNR of user ``k``: ``|h_k^H diag(e^{j theta}) G w|^2 / sigma2``."""
    theta = np.asarray(theta, dtype=float)
    w = np.asarray(w, dtype=complex)
    if theta.shape != (ch.N_s,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({ch.N_s},)")
    if w.shape != (ch.M,):
        raise ValueError(f"beamformer has shape {w.shape}, expected ({ch.M},)")
    if p_max is not None and np.vdot(w, w).real > p_max * (1 + 1e-12):
        raise ValueError("beamformer exceeds the per-user power cap")
    y = ch.h_rk[k].conj() @ (np.exp(1j * theta) * (ch.G @ w))
    return float(abs(y) ** 2 / sigma2)
