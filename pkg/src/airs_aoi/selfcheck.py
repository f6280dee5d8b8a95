"""Oracle-equivalence suites run by ``airs-aoi selfcheck``.

Each suite compares a fast code path with a slow, independently written
reference and returns a :class:`SuiteResult`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import aoi
from .beamforming import array_gain, closed_form_snr, make_decision, optimal_phases
from .channel import brute_force_snr, build_channels, compute_angles
from .config import ScenarioConfig, near_square_factors
from .sca import SubproblemInfeasible, SubproblemSpec, solve_subproblem


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def check_snr_oracle(cfg: ScenarioConfig, n_geometries: int = 100, seed: int = 0,
                     rtol: float = 1e-9) -> SuiteResult:
    """Closed-form SNR against the full channel product with MRT and optimal phases."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_geometries):
        z = float(rng.uniform(60.0, 150.0))
        c = cfg.with_overrides(altitude=z)
        q = np.array([rng.uniform(-100.0, 800.0), rng.uniform(-350.0, 350.0), z])
        k = int(rng.integers(c.K))
        alpha = np.zeros(c.K, dtype=np.int64)
        alpha[k] = 1
        d = make_decision(c, q, alpha)
        brute = brute_force_snr(build_channels(c, q), k, d.theta, d.w, c.sigma2)
        closed = closed_form_snr(q, c.bs_position, c.user_positions[k], c)
        worst = max(worst, abs(brute - closed) / closed)
    return SuiteResult("closed-form vs brute-force SNR", worst <= rtol,
                       f"{n_geometries} geometries, max rel err {worst:.2e}")


def check_array_gain(cfg: ScenarioConfig, sizes=None, samples: int = 10_000, seed: int = 0,
                     atol: float = 1e-9) -> SuiteResult:
    """Optimal phases reach ``N_s``; random phase vectors never exceed it."""
    rng = np.random.default_rng(seed)
    sizes = sizes or (4, 64, cfg.N_s)
    worst_opt, worst_excess = 0.0, -np.inf
    lam = cfg.wavelength
    for n_s in sizes:
        n_sx, n_sy = near_square_factors(n_s)
        q = np.array([*rng.uniform(-300, 300, 2), cfg.altitude])
        l = np.array([*rng.uniform(-600, 600, 2), 0.0])
        geom = compute_angles(q, cfg.bs_position, l, wavelength=lam, d_x=cfg.d_x,
                              d_y=cfg.d_y, d_ox=cfg.d_ox, d_oz=cfg.d_oz)
        theta = optimal_phases(geom, n_sx, n_sy, lam, cfg.d_x, cfg.d_y)
        worst_opt = max(worst_opt, abs(array_gain(theta, geom, n_sx, n_sy) - n_s))
        mu = (np.arange(n_sx)[:, None] * (geom.phi_t2x - geom.phi_r1x)
              + np.arange(n_sy)[None, :] * (geom.phi_t2y - geom.phi_r1y)).reshape(-1)
        done = 0
        while done < samples:
            b = min(2000, samples - done)
            th = rng.uniform(0, 2 * np.pi, (b, n_s))
            g = np.abs(np.exp(1j * (th + mu)).sum(axis=1))
            worst_excess = max(worst_excess, float(g.max()) - n_s)
            done += b
    ok = worst_opt <= atol and worst_excess <= atol
    return SuiteResult("array-gain bound", ok,
                       f"N_s={list(sizes)}: |gain-N_s| <= {worst_opt:.1e}, "
                       f"max random excess {worst_excess:.2e}")


def check_aoi_truth_tables() -> SuiteResult:
    """Recursions against their case-by-case meaning over all small inputs."""
    bad = 0
    for alpha, xi, p_next in itertools.product((0, 1), repeat=3):
        expect = 1 if p_next else (0 if alpha else xi)
        bad += aoi.step_xi(xi, alpha, p_next) != expect
        for z in range(6):
            bad += aoi.step_z(z, alpha) != (0 if alpha else z + 1)
            for A in range(1, 11):
                expect_A = z + 1 if alpha and xi else A + 1
                bad += aoi.step_aoi(A, z, alpha, xi) != expect_A
    return SuiteResult("AoI truth tables", bad == 0, f"{bad} mismatches")


# ---------------------------------------------------------------------------
# subproblem vs grid search


def random_toy_spec(rng: np.random.Generator, max_streams: int = 3) -> SubproblemSpec:
    """A small convexified slot problem whose linearised constraints stay
    satisfiable (cap >= alpha_min) everywhere on the move disc."""
    while True:
        J = int(rng.integers(1, max_streams + 1))
        bs = np.array([0.0, 0.0, rng.uniform(10, 40)])
        q_prev = np.array([*rng.uniform(-200, 200, 2), rng.uniform(60, 150)])
        users = np.column_stack([rng.uniform(-600, 600, (J, 2)), np.zeros(J)])
        radius = float(rng.uniform(3, 25))
        d_rk2 = np.sum((users - q_prev) ** 2, axis=1)
        d_br2 = float(np.sum((q_prev - bs) ** 2))
        log_ratio = math.log(d_rk2.max() * d_br2) + math.log(rng.uniform(0.2, 2.0))
        r_rk = d_rk2 * (1 + 1e-6)
        r_br = d_br2 * (1 + 1e-6)
        cap = np.exp(log_ratio) / (r_rk * r_br)
        alpha0 = np.minimum((1 - 1e-3) / J, (1 - 1e-3) * cap)
        log_thr = math.log(10 ** 2.5)
        spec = SubproblemSpec(q_prev=q_prev, radius=radius, bs=bs, users=users,
                              streams=np.arange(J), weights=rng.integers(1, 11, J).astype(float),
                              r_rk_lin=r_rk, r_br_lin=r_br, alpha_lin=alpha0,
                              log_gamma=log_ratio + log_thr, log_threshold=log_thr)
        pts = disc_points(q_prev, radius, 1.0)
        if np.all(alpha_caps(spec, pts) >= spec.alpha_min):
            return spec


def disc_points(q_prev, radius: float, step: float) -> np.ndarray:
    """Square lattice of spacing ``step`` inside the disc plus its boundary circle."""
    n = int(math.floor(radius / step))
    g = np.arange(-n, n + 1) * step
    ux, uy = np.meshgrid(g, g)
    inside = ux**2 + uy**2 <= radius**2
    m = max(8, int(math.ceil(2 * math.pi * radius / step)))
    ang = 2 * np.pi * np.arange(m) / m
    u = np.vstack([np.column_stack([ux[inside], uy[inside]]),
                   radius * np.column_stack([np.cos(ang), np.sin(ang)])])
    return np.column_stack([q_prev[0] + u[:, 0], q_prev[1] + u[:, 1],
                            np.full(len(u), q_prev[2])])


def alpha_caps(spec: SubproblemSpec, pts) -> np.ndarray:
    """Largest alpha each linearised constraint admits with tight slacks, (P, J)."""
    r = np.sum((pts[:, None, :] - spec.users[None]) ** 2, axis=2)
    rb = np.sum((pts - spec.bs) ** 2, axis=1)
    const = np.log(spec.r_rk_lin) + math.log(spec.r_br_lin) + np.log(spec.alpha_lin) - 3.0
    budget = (spec.log_gamma - spec.log_threshold) - const - r / spec.r_rk_lin \
        - (rb / spec.r_br_lin)[:, None]
    return spec.alpha_lin * budget


def lp_vertex_values(weights, upper, alpha_min: float) -> np.ndarray:
    """max w.alpha over alpha_min <= alpha <= upper, sum alpha <= 1, by vertex enumeration.

    ``upper`` is (P, J); infeasible rows give ``-inf``. A vertex fixes every coordinate
    at a bound except at most one, which then closes the sum constraint.
    """
    P, J = upper.shape
    best = np.full(P, -np.inf)
    feasible_box = np.all(upper >= alpha_min, axis=1)
    for free in [None, *range(J)]:
        fixed = [j for j in range(J) if j != free]
        for pattern in itertools.product((0, 1), repeat=len(fixed)):
            alpha = np.full((P, J), alpha_min)
            for j, hi in zip(fixed, pattern):
                if hi:
                    alpha[:, j] = upper[:, j]
            if free is not None:
                alpha[:, free] = 1.0 - (alpha.sum(axis=1) - alpha[:, free])
            ok = feasible_box & (alpha.sum(axis=1) <= 1 + 1e-12)
            ok &= np.all((alpha >= alpha_min - 1e-15) & (alpha <= upper + 1e-15), axis=1)
            val = np.where(ok, alpha @ weights, -np.inf)
            best = np.maximum(best, val)
    return best


def grid_search_subproblem(spec: SubproblemSpec, step: float = 1.0) -> tuple[float, np.ndarray]:
    """Best objective over the position lattice with the exact per-point LP optimum."""
    pts = disc_points(spec.q_prev, spec.radius, step)
    upper = np.minimum(1.0, alpha_caps(spec, pts))
    vals = lp_vertex_values(spec.weights, upper, spec.alpha_min)
    i = int(np.argmax(vals))
    return float(vals[i]), pts[i]


def check_subproblem_grid(n_instances: int = 50, seed: int = 0, rtol: float = 1e-3
                          ) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = 0
    for _ in range(n_instances):
        spec = random_toy_spec(rng)
        try:
            sol = solve_subproblem(spec)
        except SubproblemInfeasible:
            failures += 1
            continue
        ref, _ = grid_search_subproblem(spec)
        worst = max(worst, abs(sol.objective - ref) / abs(ref))
    ok = failures == 0 and worst <= rtol
    return SuiteResult("subproblem vs grid search", ok,
                       f"{n_instances} instances, max rel gap {worst:.2e}, {failures} solver failures")


def run_selfcheck(cfg: ScenarioConfig | None = None, seed: int = 0) -> list:
    cfg = cfg or ScenarioConfig()
    return [
        check_snr_oracle(cfg, seed=seed),
        check_array_gain(cfg, seed=seed),
        check_aoi_truth_tables(),
        check_subproblem_grid(seed=seed),
    ]
