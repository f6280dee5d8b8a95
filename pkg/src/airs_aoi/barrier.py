"""Primal log-barrier interior-point method for small dense convex programs

    minimize    c @ x
    subject to  A @ x <= b
                x @ P_i @ x + p_i @ x + r_i <= 0     (P_i symmetric PSD)

Newton centering with backtracking line search; the barrier weight ``t`` grows
by ``mu`` per stage until the duality gap bound ``m / t`` falls below tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize


class InfeasibleStartError(ValueError):
    """The supplied starting point is not strictly feasible."""


@dataclass
class BarrierResult:
    x: np.ndarray
    objective: float
    lam_lin: np.ndarray
    lam_quad: np.ndarray
    t: float
    gap: float
    stages: int
    newton_steps: int
    stationarity: float
    complementarity: float
    primal_violation: float
    converged: bool


@dataclass
class ConvexProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    P: np.ndarray  # (m_q, n, n)
    p: np.ndarray  # (m_q, n)
    r: np.ndarray  # (m_q,)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.b.size + self.r.size

    def slacks(self, x):
        s_lin = self.b - self.A @ x
        Px = self.P @ x
        s_quad = -(Px @ x + self.p @ x + self.r)
        return s_lin, s_quad, Px

    def quad_values(self, x) -> np.ndarray:
        return (self.P @ x) @ x + self.p @ x + self.r

    def strictly_feasible(self, x) -> bool:
        s_lin, s_quad, _ = self.slacks(x)
        return bool(np.all(s_lin > 0) and np.all(s_quad > 0))


def _barrier_value(prog: ConvexProgram, x, t):
    s_lin, s_quad, _ = prog.slacks(x)
    if np.any(s_lin <= 0) or np.any(s_quad <= 0):
        return np.inf
    return t * (prog.c @ x) - np.log(s_lin).sum() - np.log(s_quad).sum()


def _derivatives(prog: ConvexProgram, x, t):
    s_lin, s_quad, Px = prog.slacks(x)
    grad_q = 2.0 * Px + prog.p  # (m_q, n)
    inv_l = 1.0 / s_lin
    inv_q = 1.0 / s_quad
    grad = t * prog.c + prog.A.T @ inv_l + grad_q.T @ inv_q
    Al = prog.A * inv_l[:, None]
    Gq = grad_q * inv_q[:, None]
    hess = Al.T @ Al + Gq.T @ Gq + 2.0 * np.tensordot(inv_q, prog.P, axes=1)
    return grad, hess, s_lin, s_quad, grad_q


def _newton_step(hess, grad):
    try:
        factor = scipy.linalg.cho_factor(hess, check_finite=False)
        return -scipy.linalg.cho_solve(factor, grad, check_finite=False)
    except np.linalg.LinAlgError:
        return -np.linalg.lstsq(hess, grad, rcond=None)[0]


def _center(prog, x, t, tol, max_steps, alpha=0.25, beta=0.5):
    steps = 0
    prev = np.inf
    for _ in range(max_steps):
        grad, hess, *_ = _derivatives(prog, x, t)
        dx = _newton_step(hess, grad)
        decrement2 = -grad @ dx
        if decrement2 / 2.0 <= tol:
            break
        if decrement2 < 1e-10 and decrement2 >= 0.5 * prev:
            # quadratic convergence has stalled at the rounding floor
            break
        prev = decrement2
        step = 1.0
        if decrement2 < 0.0625:
            # quadratic region of a self-concordant barrier: the full step is safe,
            # only guard against rounding pushing a slack through zero
            while not prog.strictly_feasible(x + step * dx) and step > 1e-14:
                step *= beta
        else:
            f0 = _barrier_value(prog, x, t)
            while _barrier_value(prog, x + step * dx, t) > f0 + alpha * step * (grad @ dx):
                step *= beta
                if step < 1e-14:
                    break
        steps += 1
        if step < 1e-14:
            break
        x = x + step * dx
    return x, steps


def _kkt(c, jac, lam, slack, c_scale):
    """Scaled Lagrangian-gradient norm and largest complementarity product."""
    stat = float(np.max(np.abs(c + jac.T @ lam))) / c_scale if c.size else 0.0
    comp = float(np.max(lam * slack)) if lam.size else 0.0
    return stat, comp


def _polish(c, jac, lam, rel: float):
    """NNLS multipliers restricted to constraints whose barrier multiplier exceeds
    ``rel`` times the largest one."""
    if not lam.size:
        return None
    active = lam >= rel * max(1.0, float(lam.max()))
    fit, _ = scipy.optimize.nnls(jac[active].T, -c)
    out = np.zeros_like(lam)
    out[active] = fit
    return out


def solve(prog: ConvexProgram, x0, *, gap_tol: float = 1e-9, mu: float = 10.0,
          t0: float = 1.0, newton_tol: float = 1e-16, max_newton: int = 80,
          max_stages: int = 40) -> BarrierResult:
    """Run the barrier method from the strictly feasible point ``x0``."""
    x = np.asarray(x0, dtype=float).copy()
    if not prog.strictly_feasible(x):
        raise InfeasibleStartError("starting point violates a constraint")
    m = prog.m
    t = float(t0)
    total_steps = 0
    stages = 0
    converged = False
    for stages in range(1, max_stages + 1):
        x, steps = _center(prog, x, t, newton_tol, max_newton)
        total_steps += steps
        if m / t < gap_tol:
            converged = True
            break
        t *= mu

    _, _, s_lin, s_quad, grad_q = _derivatives(prog, x, t)
    jac = np.vstack([prog.A, grad_q])
    slack = np.concatenate([s_lin, s_quad])
    lam = 1.0 / (t * slack)
    c_scale = max(1.0, float(np.max(np.abs(prog.c)))) if prog.c.size else 1.0
    stationarity, comp = _kkt(prog.c, jac, lam, slack, c_scale)
    # central-path multipliers inherit the rounding error of tiny slacks; refit them
    # on candidate active sets and keep whichever certificate is tightest
    for rel in (1e-2, 1e-4, 1e-6):
        polished = _polish(prog.c, jac, lam, rel)
        if polished is None:
            break
        st2, comp2 = _kkt(prog.c, jac, polished, slack, c_scale)
        if max(st2, comp2) < max(stationarity, comp):
            lam, stationarity, comp = polished, st2, comp2
    lam_lin, lam_quad = lam[:prog.b.size], lam[prog.b.size:]
    violation = max(0.0, float(-np.min(slack))) if slack.size else 0.0
    return BarrierResult(
        x=x, objective=float(prog.c @ x), lam_lin=lam_lin, lam_quad=lam_quad, t=t,
        gap=m / t, stages=stages, newton_steps=total_steps,
        stationarity=stationarity, complementarity=comp,
        primal_violation=violation, converged=converged,
    )
