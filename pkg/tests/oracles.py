"""Slow reference solvers used by the test-suite (kept separate from package code)."""

import math

import numpy as np

GOLDEN = (math.sqrt(5) - 1) / 2


def linearized_caps(spec, q):
    """Per-stream alpha cap of the linearised constraints with the slacks made tight."""
    q = np.asarray(q, dtype=float)
    caps = np.empty(spec.J)
    r_br = float(np.sum((q - spec.bs) ** 2))
    for j in range(spec.J):
        r = float(np.sum((q - spec.users[j]) ** 2))
        r0, rb0, a0 = spec.r_rk_lin[j], spec.r_br_lin, spec.alpha_lin[j]
        budget = (spec.log_gamma - spec.log_threshold
                  - (math.log(r0) + math.log(rb0) + math.log(a0) - 3.0)
                  - r / r0 - r_br / rb0)
        caps[j] = a0 * budget
    return caps


def greedy_lp(weights, upper, alpha_min):
    """max w.alpha, alpha_min <= alpha <= upper, sum(alpha) <= 1 (fractional knapsack)."""
    if np.any(upper < alpha_min) or alpha_min * len(weights) > 1:
        return -math.inf
    alpha = np.full(len(weights), alpha_min)
    budget = 1.0 - alpha.sum()
    for j in np.argsort(-np.asarray(weights), kind="stable"):
        take = min(upper[j] - alpha_min, budget)
        if take <= 0 or weights[j] <= 0:
            continue
        alpha[j] += take
        budget -= take
    return float(np.dot(weights, alpha))


def reduced_objective(spec, q):
    return greedy_lp(spec.weights, np.minimum(1.0, linearized_caps(spec, q)), spec.alpha_min)


def grid_reference(spec, step=1.0):
    """Best value over a square lattice (spacing ``step``) in the disc plus points on its rim."""
    R = spec.radius
    n = int(R // step)
    best, arg = -math.inf, None
    cands = [(i * step, j * step) for i in range(-n, n + 1) for j in range(-n, n + 1)
             if (i * step) ** 2 + (j * step) ** 2 <= R * R]
    m = max(8, math.ceil(2 * math.pi * R / step))
    cands += [(R * math.cos(2 * math.pi * k / m), R * math.sin(2 * math.pi * k / m))
              for k in range(m)]
    for ux, uy in cands:
        q = spec.q_prev + np.array([ux, uy, 0.0])
        v = reduced_objective(spec, q)
        if v > best:
            best, arg = v, q
    return best, arg


def _golden_max(f, lo, hi, tol):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def exact_reference(spec, tol=1e-9):
    """Nested golden-section maximisation of the concave reduced objective over the disc."""
    R = spec.radius

    def best_on_chord(ux):
        h = math.sqrt(max(R * R - ux * ux, 0.0))
        return _golden_max(lambda uy: reduced_objective(spec, spec.q_prev + [ux, uy, 0.0]),
                           -h, h, tol)

    ux, _ = _golden_max(lambda u: best_on_chord(u)[1], -R, R, tol)
    uy, val = best_on_chord(ux)
    return val, spec.q_prev + np.array([ux, uy, 0.0])


def toy_spec(rng, max_streams=3):
    """Random single-slot subproblem with K <= ``max_streams`` streams, started at the
    SCA initialisation and satisfiable over the whole move disc."""
    from airs_aoi.sca import SubproblemSpec

    while True:
        J = int(rng.integers(1, max_streams + 1))
        bs = np.array([0.0, 0.0, rng.uniform(5, 50)])
        q_prev = np.array([rng.uniform(-300, 300), rng.uniform(-300, 300), rng.uniform(50, 200)])
        users = np.column_stack([rng.uniform(-700, 700, (J, 2)), np.zeros(J)])
        radius = float(rng.uniform(2, 30))
        r_rk = np.sum((users - q_prev) ** 2, axis=1) * (1 + 1e-6)
        r_br = float(np.sum((q_prev - bs) ** 2)) * (1 + 1e-6)
        log_ratio = math.log(np.median(r_rk) * r_br) + rng.uniform(-0.5, 1.0)
        cap = np.exp(log_ratio) / (r_rk * r_br)
        alpha0 = np.minimum((1 - 1e-3) / J, (1 - 1e-3) * cap)
        if np.any(alpha0 <= 1e-5):
            continue
        log_thr = math.log(rng.uniform(10, 1000))
        spec = SubproblemSpec(q_prev=q_prev, radius=radius, bs=bs, users=users,
                              streams=np.arange(J), weights=rng.uniform(0.5, 20, J),
                              r_rk_lin=r_rk, r_br_lin=r_br, alpha_lin=alpha0,
                              log_gamma=log_ratio + log_thr, log_threshold=log_thr)
        rim = [spec.q_prev + radius * np.array([math.cos(a), math.sin(a), 0.0])
               for a in np.linspace(0, 2 * math.pi, 720, endpoint=False)]
        if all(np.all(linearized_caps(spec, q) >= spec.alpha_min) for q in rim):
            return spec
