"""Market data model and closed-form market math.

Odds are decimal (European): a unit stake on an outcome with odds ``o``
returns ``o`` in total when that outcome occurs and nothing otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PROB_SUM_TOL = 1e-6
NEGLIGIBLE_STAKE = 1e-4


class MarketError(ValueError):
    """Invalid market data or mismatched dimensions."""


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MatchMarket:
    """One match: ``m`` mutually exclusive outcomes with odds and probabilities.

    ``bettable`` marks outcomes a strategy may stake on.  Outcomes flagged
    ``False`` still take part in the outcome space (they carry probability)
    but their stake is pinned at zero.
    """

    match_id: str
    outcome_labels: tuple[str, ...]
    odds: np.ndarray
    probs: np.ndarray
    realized: int | None = None
    bettable: tuple[bool, ...] | None = None

    def __post_init__(self):
        labels = tuple(str(x) for x in self.outcome_labels)
        odds = _frozen(self.odds)
        probs = _frozen(self.probs)
        object.__setattr__(self, "outcome_labels", labels)
        object.__setattr__(self, "odds", odds)
        object.__setattr__(self, "probs", probs)
        m = len(labels)
        if m < 2:
            raise MarketError(f"{self.match_id}: need at least two outcomes")
        if odds.shape != (m,) or probs.shape != (m,):
            raise MarketError(f"{self.match_id}: odds/probs length must equal {m}")
        if not np.all(odds > 1.0):
            raise MarketError(f"{self.match_id}: all odds must exceed 1, got {odds.tolist()}")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise MarketError(f"{self.match_id}: probabilities must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
            raise MarketError(f"{self.match_id}: probabilities sum to {probs.sum():.8f}, not 1")
        if self.realized is not None and not 0 <= self.realized < m:
            raise MarketError(f"{self.match_id}: realized index {self.realized} out of range")
        bettable = (True,) * m if self.bettable is None else tuple(bool(b) for b in self.bettable)
        if len(bettable) != m:
            raise MarketError(f"{self.match_id}: bettable mask length must equal {m}")
        object.__setattr__(self, "bettable", bettable)

    @property
    def m(self) -> int:
        return len(self.outcome_labels)

    @property
    def edges(self) -> np.ndarray:
        """Expected net return per unit stake, ``o * p - 1``."""
        return self.odds * self.probs - 1.0


@dataclass(frozen=True, eq=False)
class Matchweek:
    week_id: int
    matches: tuple[MatchMarket, ...]

    def __post_init__(self):
        matches = tuple(self.matches)
        if not matches:
            raise MarketError(f"matchweek {self.week_id} has no matches")
        object.__setattr__(self, "matches", matches)

    @property
    def r(self) -> int:
        return len(self.matches)

    @property
    def radices(self) -> tuple[int, ...]:
        return tuple(mk.m for mk in self.matches)

    @property
    def M(self) -> int:
        return sum(self.radices)

    @property
    def N(self) -> int:
        return int(np.prod(self.radices, dtype=object))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.radices)[:-1]]).astype(int)

    @property
    def odds(self) -> np.ndarray:
        return np.concatenate([mk.odds for mk in self.matches])

    @property
    def probs(self) -> np.ndarray:
        return np.concatenate([mk.probs for mk in self.matches])

    @property
    def bettable(self) -> np.ndarray:
        return np.concatenate([np.array(mk.bettable, dtype=bool) for mk in self.matches])

    def realized(self) -> list[int]:
        out = []
        for mk in self.matches:
            if mk.realized is None:
                raise MarketError(f"matchweek {self.week_id}: {mk.match_id} has no result")
            out.append(mk.realized)
        return out


@dataclass(frozen=True, eq=False)
class Allocation:
    """Stake vector as fractions of current wealth.

    Entries below ``negligible`` are zeroed on construction, which also
    clips tiny negative round-off from solvers.  Rescaling an existing
    allocation passes ``negligible=0`` so the cut is applied only once.
    """

    stakes: np.ndarray
    criterion_tag: str = "custom"
    converged: bool = True
    info: dict = field(default_factory=dict)
    negligible: float = NEGLIGIBLE_STAKE

    def __post_init__(self):
        stakes = np.array(self.stakes, dtype=float)
        if stakes.ndim != 1:
            raise MarketError("stakes must be a vector")
        if np.any(stakes < -1e-9):
            raise MarketError("stakes must be nonnegative")
        stakes[stakes < max(self.negligible, 0.0)] = 0.0
        stakes[stakes < 0.0] = 0.0
        if stakes.sum() > 1.0 + 1e-9:
            raise MarketError(f"total stake {stakes.sum():.10f} exceeds 1")
        stakes.setflags(write=False)
        object.__setattr__(self, "stakes", stakes)

    @property
    def total(self) -> float:
        return float(self.stakes.sum())

    @property
    def num_bets(self) -> int:
        return int(np.count_nonzero(self.stakes))


@dataclass(frozen=True, eq=False)
class PortfolioMoments:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = _frozen(self.mu)
        sigma = _frozen(self.sigma)
        if sigma.shape != (mu.size, mu.size):
            raise MarketError("sigma must be square and match mu")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class ArbitrageResult:
    allocation: Allocation
    track_take: float
    guaranteed_return: float
    is_arbitrage: bool


def net_return_distribution(market: MatchMarket) -> list[tuple[np.ndarray, float]]:
    """Net return per unit stake for each outcome, paired with its probability."""
    out = []
    for j in range(market.m):
        vec = np.full(market.m, -1.0)
        vec[j] = market.odds[j] - 1.0
        out.append((vec, float(market.probs[j])))
    return out


def _as_stakes(week: Matchweek, alloc) -> np.ndarray:
    stakes = np.asarray(getattr(alloc, "stakes", alloc), dtype=float)
    if stakes.shape != (week.M,):
        raise MarketError(f"stake vector has length {stakes.size}, matchweek needs {week.M}")
    return stakes


def total_return(week: Matchweek, alloc, realized: Sequence[int]) -> float:
    """Gross return of wealth ``1 + sum(l_i * rho_i)`` for the realized outcomes."""
    stakes = _as_stakes(week, alloc)
    if len(realized) != week.r:
        raise MarketError(f"need {week.r} realized outcomes, got {len(realized)}")
    payout = 0.0
    for mk, off, j in zip(week.matches, week.offsets, realized):
        if not 0 <= j < mk.m:
            raise MarketError(f"{mk.match_id}: realized index {j} out of range")
        payout += stakes[off + j] * mk.odds[j]
    return float(max(1.0 + payout - stakes.sum(), 0.0))


def track_take(odds: Sequence[float]) -> float:
    """Bookmaker margin ``sum(1/o) - 1``; negative means arbitrage."""
    odds = np.asarray(odds, dtype=float)
    if odds.size == 0:
        raise MarketError("empty odds vector")
    if np.any(odds <= 1.0):
        raise MarketError("all odds must exceed 1")
    return float(np.sum(1.0 / odds) - 1.0)


def arbitrage_strategy(odds: Sequence[float]) -> ArbitrageResult:
    """Stakes proportional to inverse odds, which pay ``1/(1+tt)`` whatever happens."""
    tt = track_take(odds)
    inv = 1.0 / np.asarray(odds, dtype=float)
    stakes = inv / inv.sum()
    return ArbitrageResult(
        allocation=Allocation(stakes, "arbitrage"),
        track_take=tt,
        guaranteed_return=1.0 / (1.0 + tt),
        is_arbitrage=tt < 0,
    )


def match_moments(market: MatchMarket) -> tuple[np.ndarray, np.ndarray]:
    o, p = market.odds, market.probs
    mu = o * p - 1.0
    sigma = o[:, None] * (np.diag(p) - np.outer(p, p)) * o[None, :]
    return mu, sigma


def portfolio_moments(week: Matchweek) -> PortfolioMoments:
    """Mean vector and block-diagonal covariance of the net returns."""
    mu = np.zeros(week.M)
    sigma = np.zeros((week.M, week.M))
    for mk, off in zip(week.matches, week.offsets):
        mu_k, sigma_k = match_moments(mk)
        sl = slice(off, off + mk.m)
        mu[sl] = mu_k
        sigma[sl, sl] = sigma_k
    return PortfolioMoments(mu, sigma)
