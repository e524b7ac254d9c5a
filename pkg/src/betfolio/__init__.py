"""Stake allocation for simultaneous betting markets under the Kelly and Sharpe criteria."""
from .market import (Allocation, MatchMarket, Matchweek, PortfolioMoments, arbitrage_strategy,
                     net_return_distribution, portfolio_moments, total_return, track_take)
from .kelly import (JointOutcomeModel, KellyProblem, bivariate_kelly, critical_stake, fractionalize,
                    kl_divergence_bernoulli, log_growth, simultaneous_gradient,
                    simultaneous_objective, solve_kelly)
from .sharpe import NoPositiveExcess, SharpeProblem, max_sharpe, min_variance_at_return, sharpe_ratio
from .solver import SolveOptions, SolveOutcome, check_gradient, maximize_concave, project_capped_simplex, solve_qp
from .fixtures import FixtureSet, parse_fixtures, write_fixtures
from .backtest import StrategySpec, dirichlet_baseline, fraction_sweep, restrict_week, run_backtest

__version__ = "0.1.0"

__all__ = [
    "Allocation", "MatchMarket", "Matchweek", "PortfolioMoments", "arbitrage_strategy",
    "net_return_distribution", "portfolio_moments", "total_return", "track_take",
    "JointOutcomeModel", "KellyProblem", "bivariate_kelly", "critical_stake", "fractionalize",
    "kl_divergence_bernoulli", "log_growth", "simultaneous_gradient", "simultaneous_objective",
    "solve_kelly",
    "NoPositiveExcess", "SharpeProblem", "max_sharpe", "min_variance_at_return", "sharpe_ratio",
    "SolveOptions", "SolveOutcome", "check_gradient", "maximize_concave", "project_capped_simplex",
    "solve_qp",
    "FixtureSet", "parse_fixtures", "write_fixtures",
    "StrategySpec", "dirichlet_baseline", "fraction_sweep", "restrict_week", "run_backtest",
]
