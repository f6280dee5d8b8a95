"""Per-slot joint scheduling / IRS-position optimisation by successive convex
approximation.

For the streams holding a packet, the SNR requirement
``Gamma / (r_rk r_br) >= alpha_k gamma_th`` is written in log form and its
concave left side ``ln r_rk + ln r_br + ln alpha_k`` is replaced by the first-order
expansion at the previous iterate. The expansion over-estimates a concave
function, so every iterate stays feasible for the exact constraint and the
relaxed objective ``sum b_k A_k xi_k alpha_k`` never decreases.

The convex subproblem is solved with :mod:`airs_aoi.barrier` over the scaled
variables ``x = [u_x, u_y, alpha_j..., s_j..., s_br]`` where ``q = q_prev + u`` and
``r = r_lin * s`` (``r_lin`` is the linearisation point).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import barrier
from .aoi import AoiState
from .beamforming import SlotDecision, closed_form_snr_all, make_decision
from .config import ScenarioConfig

# relative tie tolerance when rounding weighted relaxed schedules
TIE_RTOL = 1e-9
# start-point margins for the strictly feasible SCA initialisation
_R_INFLATE = 1e-6
_ALPHA_MARGIN = 1e-3


class SubproblemInfeasible(RuntimeError):
    """The convexified slot problem has no strictly feasible point."""


@dataclass
class SubproblemSpec:
    """One convexified slot problem over the streams listed in ``streams``."""

    q_prev: np.ndarray  # committed position of the previous slot (centre of the move disc)
    radius: float  # v_max * delta
    bs: np.ndarray
    users: np.ndarray  # (J, 3) positions of the participating streams
    streams: np.ndarray  # (J,) stream indices into the full K-vector
    weights: np.ndarray  # (J,) b_k A_k xi_k
    r_rk_lin: np.ndarray  # (J,) linearisation point of the user slacks
    r_br_lin: float
    alpha_lin: np.ndarray  # (J,)
    log_gamma: float  # ln Gamma
    log_threshold: float  # ln(xi gamma_th) with xi = 1
    alpha_min: float = 1e-6

    def __post_init__(self):
        if np.any(self.r_rk_lin <= 0) or self.r_br_lin <= 0 or np.any(self.alpha_lin <= 0):
            raise ValueError("linearisation point must be strictly positive")

    @property
    def J(self) -> int:
        return len(self.streams)


@dataclass(frozen=True)
class LinearizedConstraint:
    """Affine bound ``a_r * r_rk + a_br * r_br + a_alpha * alpha + const <= rhs``."""

    a_r: float
    a_br: float
    a_alpha: float
    const: float
    rhs: float

    def lhs(self, r_rk, r_br, alpha):
        return self.a_r * r_rk + self.a_br * r_br + self.a_alpha * alpha + self.const


def linearize_constraint(spec: SubproblemSpec, j: int) -> LinearizedConstraint:
    """First-order expansion of ``ln r_rk + ln r_br + ln alpha`` at the linearisation point."""
    r0, rb0, a0 = spec.r_rk_lin[j], spec.r_br_lin, spec.alpha_lin[j]
    if r0 <= 0 or rb0 <= 0 or a0 <= 0:
        raise ValueError("linearisation point must be strictly positive")
    return LinearizedConstraint(
        a_r=1.0 / r0, a_br=1.0 / rb0, a_alpha=1.0 / a0,
        const=math.log(r0) + math.log(rb0) + math.log(a0) - 3.0,
        rhs=spec.log_gamma - spec.log_threshold,
    )


@dataclass
class SubproblemResult:
    q: np.ndarray
    alpha: np.ndarray  # (J,)
    r_rk: np.ndarray
    r_br: float
    objective: float
    solver: barrier.BarrierResult


def _program(spec: SubproblemSpec, move: bool) -> barrier.ConvexProgram:
    J = spec.J
    nu = 2 if move else 0
    n = nu + 2 * J + 1
    ia = slice(nu, nu + J)  # alpha
    i_br = nu + 2 * J

    c = np.zeros(n)
    c[ia] = -spec.weights

    rows, rhs = [], []
    eye = np.eye(J)
    # alpha <= 1, -alpha <= -alpha_min, sum alpha <= 1
    A_box = np.zeros((2 * J + 1, n))
    A_box[:J, ia] = eye
    A_box[J:2 * J, ia] = -eye
    A_box[2 * J, ia] = 1.0
    rows.append(A_box)
    rhs.append(np.concatenate([np.ones(J), -spec.alpha_min * np.ones(J), [1.0]]))
    # linearised log-SNR constraints in scaled variables
    A_lin = np.zeros((J, n))
    b_lin = np.zeros(J)
    for j in range(J):
        lc = linearize_constraint(spec, j)
        A_lin[j, nu + J + j] = 1.0  # a_r * r_lin * s = s
        A_lin[j, i_br] = 1.0
        A_lin[j, nu + j] = lc.a_alpha
        b_lin[j] = lc.rhs - lc.const
    rows.append(A_lin)
    rhs.append(b_lin)

    # quadratic slack definitions |q - l|^2 / r_lin - s <= 0, and the move disc
    targets = np.vstack([spec.users, spec.bs[None, :]])
    scales = np.concatenate([spec.r_rk_lin, [spec.r_br_lin]])
    s_index = list(range(nu + J, nu + 2 * J)) + [i_br]
    m_q = J + 1 + (1 if move else 0)
    P = np.zeros((m_q, n, n))
    p = np.zeros((m_q, n))
    r = np.zeros(m_q)
    for i, (target, scale, si) in enumerate(zip(targets, scales, s_index)):
        off = spec.q_prev - target
        if move:
            P[i, 0, 0] = P[i, 1, 1] = 1.0 / scale
            p[i, :2] = 2.0 * off[:2] / scale
        p[i, si] = -1.0
        r[i] = off @ off / scale
    if move:
        P[-1, 0, 0] = P[-1, 1, 1] = 1.0
        r[-1] = -spec.radius**2
    return barrier.ConvexProgram(c=c, A=np.vstack(rows), b=np.concatenate(rhs), P=P, p=p, r=r)


def solve_subproblem(spec: SubproblemSpec, q_start=None, *, gap_tol: float = 1e-9
                     ) -> SubproblemResult:
    """Solve the convexified slot problem from the point (``q_start``, ``alpha_lin``, ``r_lin``).

    ``q_start`` must make the slacks at the linearisation point strictly feasible;
    it defaults to ``q_prev``.
    """
    move = spec.radius > 0
    prog = _program(spec, move)
    J = spec.J
    q_start = spec.q_prev if q_start is None else np.asarray(q_start, dtype=float)
    u0 = (q_start - spec.q_prev)[:2]
    x0 = np.concatenate([u0 if move else [], spec.alpha_lin, np.ones(J), [1.0]])
    try:
        res = barrier.solve(prog, x0, gap_tol=gap_tol)
    except barrier.InfeasibleStartError as exc:
        raise SubproblemInfeasible(str(exc)) from None
    nu = 2 if move else 0
    x = res.x
    q = spec.q_prev.copy()
    if move:
        q[:2] += x[:2]
    alpha = x[nu:nu + J].copy()
    r_rk = x[nu + J:nu + 2 * J] * spec.r_rk_lin
    r_br = float(x[nu + 2 * J] * spec.r_br_lin)
    return SubproblemResult(q=q, alpha=alpha, r_rk=r_rk, r_br=r_br,
                            objective=float(spec.weights @ alpha), solver=res)


# ---------------------------------------------------------------------------


@dataclass
class ScaTrace:
    """History of the outer SCA loop; entry 0 is the initial point."""

    objectives: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    residuals: list = field(default_factory=list)  # max exact-constraint violation
    kkt: list = field(default_factory=list)  # (stationarity, complementarity, gap)
    streams: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    converged: bool = False

    @property
    def iterations(self) -> int:
        return max(len(self.objectives) - 1, 0)

    def relative_changes(self) -> list:
        f = self.objectives
        return [abs(f[i] - f[i - 1]) / max(abs(f[i - 1]), 1e-12) for i in range(1, len(f))]


def participating_streams(state: AoiState, q_prev, cfg: ScenarioConfig):
    """Streams with a packet whose SNR requirement admits ``alpha >= alpha_min`` at ``q_prev``.

    Returns the stream indices together with the strictly feasible starting
    slacks and schedule weights used to initialise the SCA loop.
    """
    q_prev = np.asarray(q_prev, dtype=float)
    users = cfg.user_positions
    K = cfg.K
    d_rk2 = np.sum((users - q_prev) ** 2, axis=1)
    d_br2 = float(np.sum((q_prev - cfg.bs_position) ** 2))
    r_rk = d_rk2 * (1 + _R_INFLATE)
    r_br = d_br2 * (1 + _R_INFLATE)
    # largest alpha the exact constraint admits at the start point
    alpha_cap = cfg.snr_constant / (cfg.gamma_th * r_rk * r_br)
    alpha0 = np.minimum((1.0 - _ALPHA_MARGIN) / K, (1.0 - _ALPHA_MARGIN) * alpha_cap)
    ok = (np.asarray(state.xi) == 1) & (alpha0 > cfg.alpha_min * (1 + _ALPHA_MARGIN))
    idx = np.flatnonzero(ok)
    return idx, r_rk[idx], r_br, alpha0[idx]


def exact_violation(cfg: ScenarioConfig, q, alpha, r_rk, r_br, users, q_prev) -> float:
    """Largest violation of the unlinearised constraints (<= 0 means feasible)."""
    v = [np.max(np.sum((users - q) ** 2, axis=1) - r_rk) / np.max(r_rk),
         (np.sum((q - cfg.bs_position) ** 2) - r_br) / r_br,
         np.max(np.log(r_rk) + np.log(r_br) + np.log(alpha)
                - (math.log(cfg.snr_constant) - math.log(cfg.gamma_th))),
         np.sum(alpha) - 1.0,
         np.linalg.norm(q[:2] - q_prev[:2]) - cfg.step_radius,
         abs(q[2] - cfg.altitude)]
    return float(max(v))


def sca_optimize(state: AoiState, q_prev, cfg: ScenarioConfig, init=None):
    """Run the outer SCA loop; returns ``(q, alpha_relaxed, trace)``.

    ``init`` optionally supplies ``(q0, alpha0)`` (alpha over the participating
    streams) instead of the default start at ``q_prev`` with ``alpha = 1/K``.
    """
    q_prev = np.asarray(q_prev, dtype=float)
    K = cfg.K
    alpha_full = np.full(K, cfg.alpha_min)
    trace = ScaTrace()
    idx, r_rk, r_br, alpha0 = participating_streams(state, q_prev, cfg)
    trace.streams = idx
    if idx.size == 0:
        trace.converged = True
        return q_prev.copy(), alpha_full, trace

    users = cfg.user_positions[idx]
    weights = (np.asarray(cfg.priorities)[idx] * np.asarray(state.A)[idx]
               * np.asarray(state.xi)[idx]).astype(float)
    q = q_prev.copy()
    alpha = alpha0
    if init is not None:
        q = np.asarray(init[0], dtype=float).copy()
        alpha = np.asarray(init[1], dtype=float).copy()
        r_rk = np.sum((users - q) ** 2, axis=1) * (1 + _R_INFLATE)
        r_br = float(np.sum((q - cfg.bs_position) ** 2)) * (1 + _R_INFLATE)

    log_gamma = math.log(cfg.snr_constant)
    log_thr = math.log(cfg.gamma_th)
    trace.objectives.append(float(weights @ alpha))
    trace.positions.append(q.copy())
    trace.alphas.append(alpha.copy())
    trace.residuals.append(exact_violation(cfg, q, alpha, r_rk, r_br, users, q_prev))
    gap_tol = cfg.barrier_gap * max(1.0, float(weights.sum()))

    for _ in range(cfg.sca_max_iter):
        spec = SubproblemSpec(q_prev=q_prev, radius=cfg.step_radius, bs=cfg.bs_position,
                              users=users, streams=idx, weights=weights, r_rk_lin=r_rk,
                              r_br_lin=r_br, alpha_lin=alpha, log_gamma=log_gamma,
                              log_threshold=log_thr, alpha_min=cfg.alpha_min)
        sol = solve_subproblem(spec, q_start=q, gap_tol=gap_tol)
        q, alpha, r_rk, r_br = sol.q, sol.alpha, sol.r_rk, sol.r_br
        trace.objectives.append(sol.objective)
        trace.positions.append(q.copy())
        trace.alphas.append(alpha.copy())
        trace.residuals.append(exact_violation(cfg, q, alpha, r_rk, r_br, users, q_prev))
        trace.kkt.append((sol.solver.stationarity, sol.solver.complementarity, sol.solver.gap))
        if trace.relative_changes()[-1] < cfg.sca_tol:
            trace.converged = True
            break

    alpha_full[idx] = alpha
    return q, alpha_full, trace


def round_schedule(alpha_relaxed, state: AoiState, q, cfg: ScenarioConfig) -> np.ndarray:
    """One-hot schedule for the stream maximising ``b A xi alpha`` among those that
    hold a packet and meet the SNR threshold at ``q``; all-zero if none qualifies."""
    alpha_relaxed = np.asarray(alpha_relaxed, dtype=float)
    xi = np.asarray(state.xi)
    snr = closed_form_snr_all(q, cfg)
    ok = (xi == 1) & (snr >= cfg.gamma_th)
    out = np.zeros(cfg.K, dtype=np.int64)
    if not ok.any():
        return out
    score = np.asarray(cfg.priorities) * np.asarray(state.A) * xi * alpha_relaxed
    score = np.where(ok, score, -np.inf)
    best = score.max()
    k = int(np.flatnonzero(score >= best - TIE_RTOL * abs(best))[0])
    out[k] = 1
    return out


def sca_loop(state: AoiState, q_prev, cfg: ScenarioConfig, init=None
             ) -> tuple[SlotDecision, ScaTrace]:
    """SCA position/schedule optimisation followed by rounding and beamforming."""
    q, alpha_relaxed, trace = sca_optimize(state, q_prev, cfg, init=init)
    alpha = round_schedule(alpha_relaxed, state, q, cfg)
    return make_decision(cfg, q, alpha, alpha_relaxed=alpha_relaxed), trace
