"""Constrained optimisation backend shared by the Kelly and Sharpe criteria.

Two solvers live here: projected-gradient ascent over the capped simplex
``{x >= 0, sum(x) <= cap}`` for concave objectives, and a primal active-set
method for ``min x'Qx`` under linear equalities and nonnegativity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linprog

logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """Objective evaluated outside its domain (e.g. log of a nonpositive wealth)."""


class InfeasibleError(ValueError):
    """The constraint system admits no solution."""


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 10_000
    grad_tol: float = 1e-7
    step_shrink: float = 0.5
    armijo_slope: float = 1e-4
    domain_floor: float = 1e-12

    def __post_init__(self):
        for name in ("max_iters", "grad_tol", "step_shrink", "armijo_slope", "domain_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.grad_tol >= 1 or self.step_shrink >= 1:
            raise ValueError("grad_tol and step_shrink must be below 1")


@dataclass
class SolveOutcome:
    point: np.ndarray
    objective: float
    converged: bool
    iterations: int
    kkt_residual: float


Evaluator = Callable[[np.ndarray], tuple[float, np.ndarray]]


def project_capped_simplex(x, cap: float) -> np.ndarray:
    """Euclidean projection onto ``{y >= 0, sum(y) <= cap}``."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    x = np.asarray(x, dtype=float)
    y = np.maximum(x, 0.0)
    if y.sum() <= cap:
        return y
    # Sum constraint is active: project onto {y >= 0, sum(y) = cap}.
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - cap
    ind = np.arange(1, x.size + 1)
    rho = np.count_nonzero(u - css / ind > 0)
    theta = css[rho - 1] / rho
    return np.maximum(x - theta, 0.0)


def projected_gradient_norm(x: np.ndarray, grad: np.ndarray, cap: float) -> float:
    """Norm of the gradient mapping ``P(x + g) - x``; zero exactly at KKT points."""
    return float(np.linalg.norm(project_capped_simplex(x + grad, cap) - x))


def maximize_concave(evaluator: Evaluator, start, cap: float,
                     opts: SolveOptions | None = None) -> SolveOutcome:
    """Projected-gradient ascent with Armijo backtracking.

    The trial step length is seeded with a Barzilai-Borwein estimate and then
    halved until the sufficient-increase test passes, so the objective never
    decreases between iterates.  Steps on which the evaluator raises
    :class:`DomainError` are treated as failed trials.
    """
    opts = opts or SolveOptions()
    x = project_capped_simplex(start, cap)
    f, g = evaluator(x)
    if not np.isfinite(f):
        raise DomainError("objective is not finite at the start point")
    kkt = projected_gradient_norm(x, g, cap)
    step = 1.0
    it = 0
    while kkt > opts.grad_tol and it < opts.max_iters:
        it += 1
        t = step
        accepted = False
        while t > 1e-20:
            x_new = project_capped_simplex(x + t * g, cap)
            d = x_new - x
            if not np.any(d):
                break
            try:
                f_new, g_new = evaluator(x_new)
            except DomainError:
                t *= opts.step_shrink
                continue
            if f_new >= f + opts.armijo_slope * float(g @ d):
                accepted = True
                break
            t *= opts.step_shrink
        if not accepted:
            logger.debug("line search stalled at iteration %d (kkt=%.3e)", it, kkt)
            break
        assert f_new >= f, "objective decreased"
        s, yv = d, g_new - g
        curv = float(s @ yv)
        step = float(np.clip(-(s @ s) / curv, 1e-10, 1e10)) if curv < 0 else 1.0
        x, f, g = x_new, f_new, g_new
        kkt = projected_gradient_norm(x, g, cap)
    return SolveOutcome(x, float(f), kkt <= opts.grad_tol, it, kkt)


def _independent_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-10):
    keep = []
    for i in range(A.shape[0]):
        trial = keep + [i]
        if np.linalg.matrix_rank(A[trial], tol=tol) == len(trial):
            keep.append(i)
    A_k, b_k = A[keep], b[keep]
    if len(keep) < A.shape[0]:
        # Dropped rows must be implied by the kept ones.
        coef, *_ = np.linalg.lstsq(A_k.T, A.T, rcond=None)
        if np.max(np.abs(coef.T @ b_k - b)) > 1e-9 * (1 + np.max(np.abs(b))):
            raise InfeasibleError("inconsistent equality constraints")
    return A_k, b_k


def _qp_kkt(Q, A, x, free, tol):
    """Multipliers and KKT residual of ``min x'Qx, Ax=b, x>=0`` at ``x``."""
    grad = 2.0 * Q @ x
    if np.any(free):
        lam, *_ = np.linalg.lstsq(A[:, free].T, grad[free], rcond=None)
    else:
        lam = np.zeros(A.shape[0])
    nu = grad - A.T @ lam
    stationarity = np.abs(nu[free]).max(initial=0.0)
    complementarity = np.abs(np.minimum(x, nu)).max(initial=0.0)
    return nu, max(stationarity, complementarity)


def solve_qp(Q, A, b, nonneg: bool = True, opts: SolveOptions | None = None) -> SolveOutcome:
    """Minimise ``x'Qx`` subject to ``A x = b`` and (optionally) ``x >= 0``.

    ``Q`` must be symmetric positive semidefinite; callers add a ridge when
    the reduced Hessian may be singular.  A feasible vertex from a phase-one
    LP seeds a primal active-set iteration.
    """
    opts = opts or SolveOptions()
    Q = np.asarray(Q, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n = Q.shape[0]
    A, b = _independent_rows(A, b)
    k = A.shape[0]

    if not nonneg:
        kkt_mat = np.block([[2.0 * Q, A.T], [A, np.zeros((k, k))]])
        sol = np.linalg.solve(kkt_mat, np.concatenate([np.zeros(n), b]))
        x = sol[:n]
        _, res = _qp_kkt(Q, A, x, np.ones(n, dtype=bool), opts.grad_tol)
        return SolveOutcome(x, float(x @ Q @ x), res <= opts.grad_tol, 1, res)

    lp = linprog(np.zeros(n), A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
    if lp.status != 0:
        raise InfeasibleError("no nonnegative point satisfies the equality constraints")
    x = np.maximum(lp.x, 0.0)
    working = x <= 0.0

    it = 0
    converged = False
    res = np.inf
    while it < opts.max_iters:
        it += 1
        free = ~working
        nf = int(free.sum())
        # Equality-constrained subproblem on the free variables.
        Af = A[:, free]
        kkt_mat = np.block([[2.0 * Q[np.ix_(free, free)], Af.T], [Af, np.zeros((k, k))]])
        rhs = np.concatenate([np.zeros(nf), b])
        try:
            sol = np.linalg.solve(kkt_mat, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(kkt_mat, rhs, rcond=None)[0]
        target = np.zeros(n)
        target[free] = sol[:nf]
        p = target - x
        if np.max(np.abs(p)) <= 1e-13 * max(1.0, np.max(np.abs(x))):
            nu, res = _qp_kkt(Q, A, x, free, opts.grad_tol)
            cand = np.where(working, nu, np.inf)
            j = int(np.argmin(cand))
            if cand[j] >= -opts.grad_tol * 1e-2:
                converged = True
                break
            working[j] = False
            continue
        blocking = free & (p < 0)
        alpha, block_j = 1.0, -1
        if np.any(blocking):
            ratios = np.full(n, np.inf)
            ratios[blocking] = -x[blocking] / p[blocking]
            block_j = int(np.argmin(ratios))
            if ratios[block_j] < 1.0:
                alpha = ratios[block_j]
            else:
                block_j = -1
        x = x + alpha * p
        if block_j >= 0:
            x[block_j] = 0.0
            working[block_j] = True
        x = np.maximum(x, 0.0)

    free = ~working
    _, res = _qp_kkt(Q, A, x, free, opts.grad_tol)
    feas = float(np.max(np.abs(A @ x - b)))
    if feas > 1e-8:
        logger.warning("QP primal infeasibility %.3e", feas)
    return SolveOutcome(x, float(x @ Q @ x), converged and res <= opts.grad_tol, it, res)


def check_gradient(evaluator: Evaluator, point, h: float = 1e-6) -> float:
    """Worst central-difference discrepancy, relative to the gradient's size.

    Returns ``max_i |g_i - fd_i| / max(max_i |fd_i|, 1e-12)``.
    """
    point = np.asarray(point, dtype=float)
    _, grad = evaluator(point)
    fd = np.empty_like(point)
    for i in range(point.size):
        e = np.zeros_like(point)
        e[i] = h
        fd[i] = (evaluator(point + e)[0] - evaluator(point - e)[0]) / (2.0 * h)
    scale = max(float(np.max(np.abs(fd))), 1e-12)
    return float(np.max(np.abs(np.asarray(grad) - fd)) / scale)
