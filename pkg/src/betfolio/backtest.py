"""Season backtests with weekly reinvestment, summary metrics and random baselines."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .fixtures import FixtureSet
from .kelly import JointOutcomeModel, KellyProblem, expected_log_growth, solve_kelly
from .market import (Allocation, MarketError, MatchMarket, Matchweek, portfolio_moments,
                     total_return)
from .sharpe import NoPositiveExcess, SharpeProblem, max_sharpe, sharpe_ratio
from .solver import SolveOptions

logger = logging.getLogger(__name__)

CRITERIA = ("kelly", "sharpe")

# Ex-ante metrics come from the model (mu, sigma, log growth at the chosen
# stakes); ex-post metrics come from realized results.
METRIC_BASIS = {
    "final_wealth": "ex-post",
    "num_bets": "ex-post",
    "avg_stake": "ex-post",
    "hit_rate": "ex-post",
    "avg_sharpe": "ex-ante",
    "avg_log_growth": "ex-ante",
    "avg_volatility": "ex-ante",
    "pval_bets": "ex-post",
    "pval_wealth": "ex-post",
}


@dataclass(frozen=True)
class StrategySpec:
    criterion: str = "kelly"
    restricted: bool = False
    fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")


@dataclass
class BetRecord:
    matchweek: int
    match: str
    outcome: str
    stake: float
    odds: float
    won: bool

    @property
    def net_return(self) -> float:
        """Net return per unit staked."""
        return self.odds - 1.0 if self.won else -1.0


@dataclass
class WeekRecord:
    week: int
    stake_total: float
    gross_return: float
    pnl: float
    wealth: float
    converged: bool
    sharpe: float | None
    log_growth: float | None
    volatility: float | None
    note: str = ""


@dataclass
class BacktestReport:
    spec: StrategySpec
    wealth_path: list[float] = field(default_factory=lambda: [1.0])
    weeks: list[WeekRecord] = field(default_factory=list)
    bets: list[BetRecord] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    @property
    def weekly_pnl(self) -> list[float]:
        return [w.pnl for w in self.weeks]

    @property
    def final_wealth(self) -> float:
        return self.wealth_path[-1]


def restrict_week(week: Matchweek) -> Matchweek:
    """Keep only the highest-edge outcome of each match.

    Each match becomes a binary market: the selected outcome, and its
    complement which cannot be bet on.  Ties go to the lowest outcome index.
    The complement carries the implied odds ``1 / (1 - 1/o)`` purely as a
    placeholder; its stake is always zero.
    """
    out = []
    for mk in week.matches:
        j = int(np.argmax(mk.edges))
        o, p = float(mk.odds[j]), float(mk.probs[j])
        realized = None if mk.realized is None else (0 if mk.realized == j else 1)
        label = mk.outcome_labels[j]
        out.append(MatchMarket(mk.match_id, (label, "not " + label), (o, 1.0 / (1.0 - 1.0 / o)),
                               (p, 1.0 - p), realized, bettable=(True, False)))
    return Matchweek(week.week_id, tuple(out))


def allocate(week: Matchweek, spec: StrategySpec, opts: SolveOptions | None = None) -> Allocation:
    """Stakes for one (already restricted, if required) matchweek."""
    if spec.criterion == "kelly":
        return solve_kelly(KellyProblem.from_week(week, fraction=spec.fraction), opts)
    try:
        return max_sharpe(SharpeProblem.from_week(week, fraction=spec.fraction), opts)
    except NoPositiveExcess:
        return Allocation(np.zeros(week.M), "sharpe", True, {"note": "no positive excess"})


def one_sided_ttest(sample) -> float | None:
    """p-value for H0: mean <= 0 against H1: mean > 0 (Student t, n-1 df)."""
    x = np.asarray(sample, dtype=float)
    if x.size < 2:
        return None
    mean = x.mean()
    sd = x.std(ddof=1)
    if sd == 0.0:
        return 0.5 if mean == 0.0 else (0.0 if mean > 0 else 1.0)
    t = mean / (sd / math.sqrt(x.size))
    return float(stats.t.sf(t, df=x.size - 1))


def compute_metrics(report: BacktestReport) -> dict:
    if not report.weeks:
        raise ValueError("no completed matchweeks")
    sharpes = [w.sharpe for w in report.weeks if w.sharpe is not None and math.isfinite(w.sharpe)]
    growths = [w.log_growth for w in report.weeks if w.log_growth is not None]
    vols = [w.volatility for w in report.weeks if w.volatility is not None]
    bets = report.bets
    return {
        "final_wealth": report.final_wealth,
        "num_bets": len(bets),
        "avg_stake": float(np.mean([w.stake_total for w in report.weeks])),
        "hit_rate": float(np.mean([b.won for b in bets])) if bets else None,
        "avg_sharpe": float(np.mean(sharpes)) if sharpes else None,
        "avg_log_growth": float(np.mean(growths)) if growths else None,
        "avg_volatility": float(np.mean(vols)) if vols else None,
        "pval_bets": one_sided_ttest([b.net_return for b in bets]),
        "pval_wealth": one_sided_ttest(report.weekly_pnl),
    }


def run_backtest(fixtures: FixtureSet, spec: StrategySpec, from_week: int | None = None,
                 to_week: int | None = None, opts: SolveOptions | None = None) -> BacktestReport:
    """Bet every matchweek in range, reinvesting gains; ruin (wealth 0) is absorbing."""
    weeks = fixtures.matchweeks(from_week, to_week)
    if not weeks:
        raise MarketError("no matchweeks in the requested range")
    report = BacktestReport(spec)
    wealth = 1.0
    for full in weeks:
        week = restrict_week(full) if spec.restricted else full
        realized = week.realized()
        if wealth <= 0.0:
            report.weeks.append(WeekRecord(week.week_id, 0.0, 1.0, 0.0, 0.0, True,
                                           None, None, None, "ruined"))
            report.wealth_path.append(0.0)
            continue
        alloc = allocate(week, spec, opts)
        gross = total_return(week, alloc, realized)
        new_wealth = wealth * gross
        stakes = alloc.stakes
        sharpe = log_g = vol = None
        if alloc.total > 0:
            mom = portfolio_moments(week)
            vol = float(np.sqrt(max(stakes @ mom.sigma @ stakes, 0.0)))
            try:
                sharpe = sharpe_ratio(mom, stakes)
            except ZeroDivisionError:
                sharpe = None
            log_g = expected_log_growth(JointOutcomeModel(week), stakes)
        else:
            log_g, vol = 0.0, 0.0
        for mk, off, j in zip(week.matches, week.offsets, realized):
            for i in np.flatnonzero(stakes[off:off + mk.m]):
                report.bets.append(BetRecord(week.week_id, mk.match_id, mk.outcome_labels[i],
                                             float(stakes[off + i]), float(mk.odds[i]), bool(i == j)))
        if not alloc.converged:
            logger.warning("matchweek %d: solver did not converge, using last iterate", week.week_id)
        report.weeks.append(WeekRecord(week.week_id, alloc.total, gross, new_wealth - wealth,
                                       new_wealth, alloc.converged, sharpe, log_g, vol,
                                       alloc.info.get("note", "")))
        report.wealth_path.append(new_wealth)
        wealth = new_wealth
    report.metrics = compute_metrics(report)
    return report


# --- random baselines -------------------------------------------------------

def _season_arrays(fixtures: FixtureSet, from_week=None, to_week=None):
    """Per week: (odds vector, flat index of each realized outcome)."""
    out = []
    for week in fixtures.matchweeks(from_week, to_week):
        realized = np.asarray(week.realized()) + week.offsets
        out.append((week.odds, realized))
    return out


def _dirichlet_paths(season, fraction: float, seeds) -> list[float]:
    finals = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        wealth = 1.0
        for odds, won in season:
            draws = rng.standard_exponential(odds.size)
            stakes = fraction * draws / draws.sum()
            if wealth > 0.0:
                gross = 1.0 + float(np.sum(stakes[won] * odds[won])) - float(stakes.sum())
                wealth *= max(gross, 0.0)
        finals.append(wealth)
    return finals


@dataclass
class BaselineResult:
    final_wealth: np.ndarray
    reference_percentile: float | None = None

    def summary(self) -> dict:
        q = np.percentile(self.final_wealth, [0, 25, 50, 75, 100])
        return dict(zip(("min", "p25", "median", "p75", "max"), map(float, q)))


def percentile_of(sample, value: float) -> float:
    """Share of the sample strictly below ``value`` (ties count half), in percent."""
    sample = np.asarray(sample, dtype=float)
    below = np.sum(sample < value) + 0.5 * np.sum(sample == value)
    return float(100.0 * below / sample.size)


def dirichlet_baseline(fixtures: FixtureSet, n_sims: int, fraction: float, seed: int,
                       reference: float | None = None, workers: int = 1,
                       from_week: int | None = None, to_week: int | None = None) -> BaselineResult:
    """Final wealth of random strategies drawn uniformly on the simplex each week.

    Every simulation gets its own child seed from ``SeedSequence(seed)``, so
    results do not depend on how simulations are spread across workers.
    """
    if n_sims < 1:
        raise ValueError("n_sims must be at least 1")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    season = _season_arrays(fixtures, from_week, to_week)
    seeds = np.random.SeedSequence(seed).spawn(n_sims)
    if workers <= 1:
        finals = _dirichlet_paths(season, fraction, seeds)
    else:
        chunks = [seeds[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_dirichlet_paths, [season] * workers, [fraction] * workers, chunks))
        finals = [0.0] * n_sims
        for w, part in enumerate(parts):
            finals[w::workers] = part
    finals = np.asarray(finals)
    pct = percentile_of(finals, reference) if reference is not None else None
    return BaselineResult(finals, pct)


def fraction_sweep(fixtures: FixtureSet, spec: StrategySpec, grid, mode: str = "dirichlet",
                   n_sims: int = 200, workers: int = 1) -> dict:
    """Median final wealth for each fraction in ``grid``.

    ``mode="dirichlet"`` sweeps the random baseline; ``mode="criterion"``
    scales the criterion's full allocation by each fraction.
    """
    grid = [float(f) for f in grid]
    if not grid:
        raise ValueError("empty fraction grid")
    rows = []
    for f in grid:
        if mode == "dirichlet":
            med = float(np.median(dirichlet_baseline(fixtures, n_sims, f, spec.seed,
                                                     workers=workers).final_wealth))
        elif mode == "criterion":
            med = run_backtest(fixtures, StrategySpec(spec.criterion, spec.restricted, f, spec.seed)).final_wealth
        else:
            raise ValueError("mode must be 'dirichlet' or 'criterion'")
        rows.append((f, med))
    best = max(rows, key=lambda fr: fr[1])[0]
    return {"rows": rows, "argmax": best}


def simulate_repeated_bet(odds: float, p: float, stakes, rounds: int, seeds) -> np.ndarray:
    """Terminal log wealth from betting fixed fractions on i.i.d. binary bets.

    Each seed draws one win/lose sequence shared by all stake levels.
    Returns an array of shape ``(len(seeds), len(stakes))``.
    """
    stakes = np.asarray(stakes, dtype=float)
    win = np.log1p((odds - 1.0) * stakes)
    lose = np.log1p(-stakes)
    out = np.empty((len(seeds), stakes.size))
    for i, s in enumerate(seeds):
        wins = int(np.count_nonzero(np.random.default_rng(s).random(rounds) < p))
        out[i] = wins * win + (rounds - wins) * lose
    return out
