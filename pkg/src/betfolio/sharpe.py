"""Mean-variance allocation: frontier points and the maximum Sharpe portfolio."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import Allocation, Matchweek, PortfolioMoments, arbitrage_strategy, portfolio_moments
from .solver import InfeasibleError, SolveOptions, solve_qp

RIDGE = 1e-10


class NoPositiveExcess(ValueError):
    """No admissible portfolio beats the risk-free rate."""


@dataclass(frozen=True)
class SharpeProblem:
    moments: PortfolioMoments
    risk_free: float = 0.0
    fraction: float = 1.0
    bettable: np.ndarray | None = None
    # Per-match (offset, odds) for fully bettable matches; enables the arbitrage shortcut.
    blocks: tuple[tuple[int, np.ndarray], ...] = ()

    def __post_init__(self):
        if self.risk_free < 0:
            raise ValueError("risk_free must be nonnegative")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")

    @classmethod
    def from_week(cls, week: Matchweek, risk_free: float = 0.0, fraction: float = 1.0):
        blocks = [(int(off), mk.odds) for mk, off in zip(week.matches, week.offsets)
                  if all(mk.bettable)]
        return cls(portfolio_moments(week), risk_free, fraction, week.bettable, tuple(blocks))


def sharpe_ratio(moments: PortfolioMoments, alloc, risk_free: float = 0.0) -> float:
    """Excess mean over standard deviation; ``inf`` for riskless positive excess."""
    stakes = np.asarray(getattr(alloc, "stakes", alloc), dtype=float)
    excess = float(stakes @ moments.mu) - risk_free
    var = float(stakes @ moments.sigma @ stakes)
    scale = max(float(stakes @ stakes), 1e-300) * max(float(np.abs(moments.sigma).max()), 1.0)
    if var <= 1e-14 * scale:
        if excess > 0:
            return float("inf")
        if excess < 0:
            return float("-inf")
        raise ZeroDivisionError("portfolio has zero variance and zero excess return")
    return excess / np.sqrt(var)


def min_variance_at_return(moments: PortfolioMoments, target: float,
                           opts: SolveOptions | None = None) -> Allocation:
    """Minimum-variance fully invested portfolio with expected return ``target``."""
    mu = moments.mu
    if not mu.min() - 1e-12 <= target <= mu.max() + 1e-12:
        raise InfeasibleError(f"target {target} outside [{mu.min()}, {mu.max()}]")
    A = np.vstack([mu, np.ones_like(mu)])
    out = solve_qp(moments.sigma, A, np.array([target, 1.0]), opts=opts)
    return Allocation(out.point, "sharpe", out.converged,
                      {"kkt_residual": out.kkt_residual, "iterations": out.iterations},
                      negligible=0.0)


def _lifted_solve(sigma, excess, opts):
    """Solve the lifted problem in ``(y, kappa)``; returns the normalised weights."""
    n = excess.size
    Q = np.zeros((n + 1, n + 1))
    Q[:n, :n] = sigma + RIDGE * np.eye(n)
    A = np.zeros((2, n + 1))
    A[0, :n] = excess
    A[1, :n] = 1.0
    A[1, n] = -1.0
    out = solve_qp(Q, A, np.array([1.0, 0.0]), opts=opts)
    y, kappa = out.point[:n], out.point[n]
    return y / kappa, out


def max_sharpe(problem: SharpeProblem, opts: SolveOptions | None = None) -> Allocation:
    """Portfolio maximising the Sharpe ratio, fully invested then scaled by the fraction.

    Matches with a negative track take admit a riskless positive return, so
    the ratio is unbounded.  When any exist, the optimum is restricted to
    those matches: each keeps its inverse-odds stakes, and wealth is split
    between them as in the vanishing-ridge limit of the lifted problem.
    """
    mom = problem.moments
    n = mom.mu.size
    free = np.ones(n, dtype=bool) if problem.bettable is None else np.asarray(problem.bettable)
    excess = mom.mu - problem.risk_free

    arb = [(off, arbitrage_strategy(odds)) for off, odds in problem.blocks]
    arb = [(off, res) for off, res in arb
           if res.is_arbitrage and res.guaranteed_return - 1.0 > problem.risk_free]
    info: dict = {"arbitrage": bool(arb)}
    stakes = np.zeros(n)
    if arb:
        # Riskless directions only.  Weights w_k = e_k / |l_k|^2 are the limit of the
        # ridge-regularised lifted problem as the ridge goes to zero.
        for off, res in arb:
            la = res.allocation.stakes
            stakes[off:off + la.size] = (res.guaranteed_return - 1.0 - problem.risk_free) / (la @ la) * la
        stakes /= stakes.sum()
        info["guaranteed_returns"] = [res.guaranteed_return for _, res in arb]
        info.update(iterations=0, kkt_residual=0.0)
        converged = True
    else:
        idx = np.flatnonzero(free)
        if not np.any(excess[idx] > 0):
            raise NoPositiveExcess("no bet has expected return above the risk-free rate")
        weights, out = _lifted_solve(mom.sigma[np.ix_(idx, idx)], excess[idx], opts)
        stakes[idx] = weights
        stakes = np.maximum(stakes, 0.0)
        stakes /= stakes.sum()
        info.update(iterations=out.iterations, kkt_residual=out.kkt_residual)
        converged = out.converged
    alloc = Allocation(stakes, "sharpe", converged, info)
    # Renormalise after the negligible-stake cut so the budget stays exhausted.
    base = alloc.stakes / alloc.stakes.sum()
    return Allocation(base * problem.fraction, "sharpe", converged, info, negligible=0.0)

