"""Kelly criterion: the classic binary bet and the simultaneous multi-match problem.

For ``r`` independent matches the joint outcome space has ``N = prod(m_k)``
elements.  Rather than building the ``M x N`` consequence matrix, wealth
factors are formed as an ``r``-dimensional tensor by broadcasting one
per-match payout vector along each axis.  Axes are stored in reverse match
order, so the C-order flattening makes match 1 vary fastest (little-endian
mixed radix).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .market import Allocation, MarketError, Matchweek
from .solver import DomainError, SolveOptions, maximize_concave

logger = logging.getLogger(__name__)

DEFAULT_STAKE_CAP = 1.0 - 1e-6


class JointOutcomeModel:
    """Independent product of match outcome distributions."""

    def __init__(self, week: Matchweek):
        self.week = week
        self.radices = week.radices
        self.joint_count = int(np.prod(self.radices))
        self.odds = week.odds
        self.offsets = week.offsets
        self._shape = tuple(reversed(self.radices))
        tensor = np.ones(self._shape)
        for k, mk in enumerate(week.matches):
            tensor = tensor * self._along(k, mk.probs)
        self.prob_tensor = tensor
        self._positive = tensor > 0.0

    @property
    def M(self) -> int:
        return self.week.M

    def _along(self, k: int, vec: np.ndarray) -> np.ndarray:
        shape = [1] * len(self.radices)
        shape[len(self.radices) - 1 - k] = len(vec)
        return np.reshape(vec, shape)

    def index_to_outcomes(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < self.joint_count:
            raise IndexError(i)
        out = []
        for m in self.radices:
            i, j = divmod(i, m)
            out.append(j)
        return tuple(out)

    def outcomes_to_index(self, outcomes) -> int:
        i = 0
        for m, j in zip(reversed(self.radices), reversed(tuple(outcomes))):
            if not 0 <= j < m:
                raise IndexError(outcomes)
            i = i * m + j
        return i

    def joint_probs(self) -> np.ndarray:
        return self.prob_tensor.ravel()

    def consequence_matrix(self) -> np.ndarray:
        """Dense ``M x N`` gross-payout matrix; intended for small checks only."""
        W = np.zeros((self.M, self.joint_count))
        for i in range(self.joint_count):
            for k, j in enumerate(self.index_to_outcomes(i)):
                W[self.offsets[k] + j, i] = self.week.matches[k].odds[j]
        return W

    def wealth_factors(self, stakes) -> np.ndarray:
        """Tensor of ``1 + (W' l)_i - sum(l)`` over all joint outcomes."""
        stakes = np.asarray(stakes, dtype=float)
        if stakes.shape != (self.M,):
            raise MarketError(f"stake vector has length {stakes.size}, model needs {self.M}")
        R = np.full(self._shape, 1.0 - stakes.sum())
        for k, mk in enumerate(self.week.matches):
            off = self.offsets[k]
            R = R + self._along(k, mk.odds * stakes[off:off + mk.m])
        return R

    def expected_log(self, R: np.ndarray) -> float:
        with np.errstate(divide="ignore"):
            logs = np.log(R[self._positive])
        return float(self.prob_tensor[self._positive] @ logs)


@dataclass(frozen=True)
class KellyProblem:
    model: JointOutcomeModel
    fraction: float = 1.0
    stake_cap: float = DEFAULT_STAKE_CAP

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if not 0.0 < self.stake_cap < 1.0:
            raise ValueError("stake_cap must lie in (0, 1)")

    @classmethod
    def from_week(cls, week: Matchweek, fraction: float = 1.0, stake_cap: float = DEFAULT_STAKE_CAP):
        return cls(JointOutcomeModel(week), fraction, stake_cap)


def bivariate_kelly(odds: float, p: float) -> float:
    """Optimal stake on a single win/lose bet, clipped at zero."""
    if odds <= 1.0:
        raise ValueError("odds must exceed 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return max(0.0, (odds * p - 1.0) / (odds - 1.0))


def log_growth(odds: float, p: float, stake: float) -> float:
    if not 0.0 <= stake < 1.0:
        raise ValueError("stake must lie in [0, 1)")
    return p * np.log1p((odds - 1.0) * stake) + (1.0 - p) * np.log1p(-stake)


def kl_divergence_bernoulli(p: float, q: float) -> float:
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise ValueError("p and q must lie strictly inside (0, 1)")
    return p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))


def critical_stake(odds: float, p: float, tol: float = 1e-15) -> float:
    """Stake above the Kelly optimum where the log-growth rate crosses zero.

    Found by bisection on ``(l*, 1)``; requires a strictly positive edge.
    """
    opt = bivariate_kelly(odds, p)
    if opt <= 0.0 or p >= 1.0:
        raise ValueError("critical stake needs a positive edge and p < 1")
    lo, hi = opt, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid >= 1.0:
            break
        if log_growth(odds, p, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def simultaneous_objective(problem: KellyProblem, stakes, floor: float = 1e-12) -> float:
    """Expected log wealth factor over every joint outcome."""
    model = problem.model
    R = model.wealth_factors(stakes)
    if np.min(R[model._positive]) <= floor:
        raise DomainError("allocation risks ruin in an attainable outcome")
    return model.expected_log(R)


def simultaneous_gradient(problem: KellyProblem, stakes, floor: float = 1e-12) -> np.ndarray:
    return _value_and_gradient(problem.model, np.asarray(stakes, dtype=float), floor)[1]


def _value_and_gradient(model: JointOutcomeModel, stakes: np.ndarray, floor: float):
    R = model.wealth_factors(stakes)
    pos = model._positive
    if np.min(R[pos]) <= floor:
        raise DomainError("allocation risks ruin in an attainable outcome")
    value = float(model.prob_tensor[pos] @ np.log(R[pos]))
    Q = np.zeros_like(R)
    Q[pos] = model.prob_tensor[pos] / R[pos]
    total = Q.sum()
    r = len(model.radices)
    grad = np.empty(model.M)
    for k, mk in enumerate(model.week.matches):
        axis = r - 1 - k
        others = tuple(a for a in range(r) if a != axis)
        marginal = Q.sum(axis=others) if others else Q
        off = model.offsets[k]
        grad[off:off + mk.m] = mk.odds * marginal - total
    return value, grad


def expected_log_growth(model: JointOutcomeModel, stakes) -> float:
    """Ex-ante log growth; ``-inf`` when some attainable outcome wipes out wealth."""
    R = model.wealth_factors(stakes)
    if np.min(R[model._positive]) <= 0.0:
        return float("-inf")
    return model.expected_log(R)


def solve_kelly(problem: KellyProblem, opts: SolveOptions | None = None) -> Allocation:
    """Maximise expected log wealth over ``{l >= 0, sum(l) <= cap}``, then scale by the fraction.

    Outcomes marked non-bettable are held at zero stake.  A non-converged
    solve returns the last iterate with ``converged=False``.
    """
    opts = opts or SolveOptions()
    model = problem.model
    free = model.week.bettable

    def evaluator(x):
        full = np.zeros(model.M)
        full[free] = x
        v, g = _value_and_gradient(model, full, opts.domain_floor)
        return v, g[free]

    out = maximize_concave(evaluator, np.zeros(int(free.sum())), problem.stake_cap, opts)
    if not out.converged:
        logger.warning("Kelly solve stopped after %d iterations (kkt=%.3e)",
                       out.iterations, out.kkt_residual)
    stakes = np.zeros(model.M)
    stakes[free] = out.point
    info = {"iterations": out.iterations, "kkt_residual": out.kkt_residual,
            "objective": out.objective, "raw_stakes": stakes}
    alloc = Allocation(stakes, "kelly", out.converged, info)
    return fractionalize(alloc, problem.fraction) if problem.fraction != 1.0 else alloc


def fractionalize(alloc: Allocation, f: float) -> Allocation:
    if not 0.0 < f <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    return Allocation(alloc.stakes * f, alloc.criterion_tag, alloc.converged,
                      dict(alloc.info, fraction=f), negligible=0.0)
