"""Episode runner, baseline policies, constraint audit, parameter sweeps and CSV output."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import aoi
from .beamforming import SlotDecision, TWO_PI, closed_form_snr_all, make_decision
from .channel import build_channels, brute_force_snr
from .config import ScenarioConfig, parse_assignments
from .sca import ScaTrace, SubproblemInfeasible, round_schedule, sca_loop

log = logging.getLogger(__name__)

POLICIES = ("proposed", "fixed-location", "greedy-no-move", "random-schedule")

# audit tolerances
POWER_RTOL = 1e-12
SNR_RTOL = 1e-9
VELOCITY_ATOL = 1e-9


@dataclass
class AuditReport:
    violations: list = field(default_factory=list)  # (slot, constraint, message)
    slots_checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass
class EpisodeResult:
    policy: str
    seed: int
    aoi: np.ndarray  # (N_T, K) AoI at the start of each slot
    xi: np.ndarray  # (N_T, K)
    schedule: np.ndarray  # (N_T, K) binary
    trajectory: np.ndarray  # (N_T, 3) committed IRS positions
    arrivals: np.ndarray  # (N_T, K)
    priorities: np.ndarray
    start: np.ndarray  # position before the first slot
    traces: list  # ScaTrace or None per slot
    infeasible_slots: list
    audit: AuditReport
    decisions: list | None = None

    @property
    def weighted_sum_aoi(self) -> float:
        """sum_k b_k sum_n A_k(n) over the episode."""
        return float(self.priorities @ self.aoi.sum(axis=0))


def audit_slot(cfg: ScenarioConfig, slot: int, decision: SlotDecision, q_prev, xi) -> list:
    """Post-hoc check of one committed decision; returns a list of violations."""
    out = []
    alpha = np.asarray(decision.alpha)
    q = np.asarray(decision.q)
    if np.vdot(decision.w, decision.w).real > cfg.p_o * (1 + POWER_RTOL):
        out.append((slot, "power", f"|w|^2 = {np.vdot(decision.w, decision.w).real}"))
    if np.any((alpha != 0) & (alpha != 1)):
        out.append((slot, "binary-schedule", f"alpha = {alpha}"))
    if alpha.sum() > 1:
        out.append((slot, "single-channel", f"{alpha.sum()} streams scheduled"))
    if q[2] != cfg.altitude:
        out.append((slot, "altitude", f"q_z = {q[2]}"))
    step = float(np.linalg.norm(q - np.asarray(q_prev)))
    if step > cfg.step_radius + VELOCITY_ATOL:
        out.append((slot, "velocity", f"moved {step} m > {cfg.step_radius} m"))
    if np.any(decision.theta < 0) or np.any(decision.theta >= TWO_PI):
        out.append((slot, "phase-range", "IRS phase outside [0, 2pi)"))
    k = decision.stream
    if k is not None and xi[k] == 1 and q[2] == cfg.altitude:
        ch = build_channels(cfg, q)
        snr = brute_force_snr(ch, k, decision.theta, decision.w, cfg.sigma2)
        if snr < cfg.gamma_th * (1 - SNR_RTOL):
            out.append((slot, "snr", f"stream {k}: SNR {snr} < {cfg.gamma_th}"))
    return out


def _baseline_decision(cfg, state, q, policy, rng):
    if policy == "random-schedule":
        snr = closed_form_snr_all(q, cfg)
        ok = np.flatnonzero((state.xi == 1) & (snr >= cfg.gamma_th))
        alpha = np.zeros(cfg.K, dtype=np.int64)
        if ok.size:
            alpha[int(rng.choice(ok))] = 1
    else:
        alpha = round_schedule(np.ones(cfg.K), state, q, cfg)
    return make_decision(cfg, q, alpha)


def start_position(cfg: ScenarioConfig, policy: str) -> np.ndarray:
    return cfg.fixed_position if policy == "fixed-location" else cfg.q_start


def run_episode(cfg: ScenarioConfig, policy: str = "proposed", seed: int | None = None,
                keep_decisions: bool = False) -> EpisodeResult:
    """Simulate ``cfg.n_t`` slots under ``policy``.

    Per slot: decide (schedule, position, beamformers) from the current state, audit
    the decision, then advance the queuing time, AoI and packet indicators.
    Arrivals are drawn up front from ``seed`` so that every policy sees the same
    packet sequence.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")
    seed = cfg.rng_seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    arrivals = aoi.draw_arrivals(cfg.epsilon, rng, cfg.n_t)
    policy_rng = np.random.default_rng([seed, 1])

    N, K = cfg.n_t, cfg.K
    A_hist = np.zeros((N, K), dtype=np.int64)
    xi_hist = np.zeros((N, K), dtype=np.int64)
    sched = np.zeros((N, K), dtype=np.int64)
    traj = np.zeros((N, 3))
    traces, infeasible, decisions = [], [], []
    report = AuditReport()

    state = aoi.initial_state(arrivals[0])
    q_start = start_position(cfg, policy)
    q_prev = q_start
    for n in range(N):
        trace = None
        if policy == "proposed":
            try:
                decision, trace = sca_loop(state, q_prev, cfg)
            except SubproblemInfeasible as exc:
                log.warning("slot %d: subproblem infeasible (%s); nobody scheduled", n, exc)
                infeasible.append(n)
                decision = make_decision(cfg, q_prev, np.zeros(K, dtype=np.int64))
        elif policy == "fixed-location":
            decision = _baseline_decision(cfg, state, cfg.fixed_position, policy, policy_rng)
        else:
            decision = _baseline_decision(cfg, state, cfg.q_start, policy, policy_rng)

        report.violations.extend(audit_slot(cfg, n, decision, q_prev, state.xi))
        report.slots_checked += 1
        alpha = decision.alpha
        A_hist[n], xi_hist[n], sched[n], traj[n] = state.A, state.xi, alpha, decision.q
        traces.append(trace)
        if keep_decisions:
            decisions.append(decision)

        z = state.z if n == 0 else aoi.step_z(state.z, alpha)
        A_next = aoi.step_aoi(state.A, z, alpha, state.xi)
        if n + 1 < N:
            p_next = arrivals[n + 1]
            xi_next = aoi.step_xi(state.xi, alpha, p_next)
            state = aoi.AoiState(A=A_next, z=z, xi=xi_next, p=p_next)
        q_prev = decision.q

    return EpisodeResult(policy=policy, seed=seed, aoi=A_hist, xi=xi_hist, schedule=sched,
                         trajectory=traj, arrivals=arrivals,
                         priorities=np.asarray(cfg.priorities, dtype=float), start=q_start,
                         traces=traces, infeasible_slots=infeasible, audit=report,
                         decisions=decisions if keep_decisions else None)


def replay_aoi(cfg: ScenarioConfig, schedule, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Recompute the (AoI, xi) histories from a schedule history and the arrival seed."""
    arrivals = aoi.draw_arrivals(cfg.epsilon, np.random.default_rng(seed), cfg.n_t)
    schedule = np.asarray(schedule)
    A = np.ones(cfg.K, dtype=np.int64)
    z = np.zeros(cfg.K, dtype=np.int64)
    xi = arrivals[0].copy()
    A_hist = np.zeros_like(schedule)
    xi_hist = np.zeros_like(schedule)
    for n in range(cfg.n_t):
        A_hist[n], xi_hist[n] = A, xi
        alpha = schedule[n]
        if n > 0:
            z = aoi.step_z(z, alpha)
        A_new = aoi.step_aoi(A, z, alpha, xi)
        if n + 1 < cfg.n_t:
            xi = aoi.step_xi(xi, alpha, arrivals[n + 1])
        A = A_new
    return A_hist, xi_hist


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    axis_name: str
    values: tuple
    seeds: tuple
    policies: tuple = ("proposed", "fixed-location")

    def __post_init__(self):
        if not self.values:
            raise ValueError("sweep axis has no values")
        if len(self.seeds) < 1:
            raise ValueError("at least one seed per point is required")
        for p in self.policies:
            if p not in POLICIES:
                raise ValueError(f"unknown policy {p!r}")


@dataclass(frozen=True)
class SweepRow:
    policy: str
    axis_name: str
    axis_value: float
    seed: int
    weighted_sum_aoi: float


@dataclass(frozen=True)
class SweepSummary:
    policy: str
    axis_name: str
    axis_value: float
    mean: float
    std: float
    sem: float
    n: int


def apply_axis(cfg: ScenarioConfig, axis_name: str, value) -> ScenarioConfig:
    """Override one scenario key, accepting the file-format names (``gamma_th_db``, ``n_s``...)."""
    return cfg.with_overrides(**parse_assignments([(axis_name, repr(value))]))


def _episode_job(args):
    cfg, policy, seed = args
    res = run_episode(cfg, policy, seed)
    if not res.audit.passed:
        raise RuntimeError(f"constraint audit failed: {res.audit.violations[:3]}")
    return res.weighted_sum_aoi


def run_sweep(spec: SweepSpec, cfg: ScenarioConfig, workers: int = 1) -> list:
    """Weighted sum AoI for every (axis value, policy, seed); rows in a fixed order."""
    keys, jobs = [], []
    for value in spec.values:
        point = apply_axis(cfg, spec.axis_name, value)
        for policy in spec.policies:
            for seed in spec.seeds:
                keys.append((policy, float(value), int(seed)))
                jobs.append((point, policy, int(seed)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_episode_job, jobs))
    else:
        values = [_episode_job(j) for j in jobs]
    return [SweepRow(p, spec.axis_name, v, s, w) for (p, v, s), w in zip(keys, values)]


def summarize(rows) -> list:
    """Mean, sample std and standard error over seeds for each (policy, axis value)."""
    groups = {}
    for r in rows:
        groups.setdefault((r.policy, r.axis_name, r.axis_value), []).append(r.weighted_sum_aoi)
    out = []
    for (policy, name, value), vals in groups.items():
        v = np.asarray(vals, dtype=float)
        std = float(v.std(ddof=1)) if v.size > 1 else 0.0
        out.append(SweepSummary(policy, name, value, float(v.mean()), std,
                                std / math.sqrt(v.size), int(v.size)))
    return out


# ---------------------------------------------------------------------------
# convergence


def sample_slots(candidates, count: int) -> list:
    candidates = list(candidates)
    if count >= len(candidates):
        return candidates
    picks = np.linspace(0, len(candidates) - 1, count).round().astype(int)
    return [candidates[i] for i in sorted(set(picks))]


def convergence_report(cfg: ScenarioConfig, slots_to_sample: int, seed: int | None = None):
    """Per-iteration SCA objective for up to ``slots_to_sample`` evenly spaced slots.

    Returns ``(rows, traces)`` with rows ``(slot, iteration, objective)``; iteration 0
    is the initial point of the loop.
    """
    res = run_episode(cfg, "proposed", seed)
    active = [n for n, tr in enumerate(res.traces) if tr is not None and tr.iterations > 0]
    chosen = sample_slots(active, slots_to_sample)
    rows = []
    for n in chosen:
        for i, f in enumerate(res.traces[n].objectives):
            rows.append((n, i, f))
    return rows, {n: res.traces[n] for n in chosen}


def converged_within(trace: ScaTrace, iterations: int, tol: float) -> bool:
    return any(c < tol for c in trace.relative_changes()[:iterations])


def is_nondecreasing(values, rtol: float = 1e-8, scale: float | None = None) -> bool:
    values = list(values)
    s = max(1.0, abs(scale) if scale is not None else max((abs(v) for v in values), default=1.0))
    return all(b >= a - rtol * s for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------
# CSV output


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def write_sweep_csv(rows, path) -> Path:
    return _write_csv(path, ["policy", "axis_name", "axis_value", "seed", "weighted_sum_aoi"],
                      [(r.policy, r.axis_name, r.axis_value, r.seed, r.weighted_sum_aoi)
                       for r in rows])


def write_summary_csv(summary, path) -> Path:
    return _write_csv(path, ["policy", "axis_name", "axis_value", "mean", "std", "sem", "n"],
                      [(s.policy, s.axis_name, s.axis_value, s.mean, s.std, s.sem, s.n)
                       for s in summary])


def write_aoi_trace_csv(result: EpisodeResult, path) -> Path:
    rows = []
    N, K = result.aoi.shape
    for n in range(N):
        for k in range(K):
            rows.append((n, k, result.aoi[n, k], result.schedule[n, k], result.xi[n, k]))
    return _write_csv(path, ["slot", "stream", "aoi", "scheduled", "xi"], rows)


def write_trajectory_csv(result: EpisodeResult, path) -> Path:
    rows = []
    for n, q in enumerate(result.trajectory):
        idx = np.flatnonzero(result.schedule[n])
        rows.append((n, float(q[0]), float(q[1]), float(q[2]), int(idx[0]) if idx.size else -1))
    return _write_csv(path, ["slot", "x", "y", "z", "scheduled_stream"], rows)


def write_convergence_csv(rows, path) -> Path:
    return _write_csv(path, ["slot", "iteration", "objective"], rows)
