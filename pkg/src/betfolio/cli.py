"""Command-line interface.

Subcommands: ``optimize``, ``backtest``, ``arb-scan``, ``simulate`` and
``sweep``.  Results are JSON on stdout (or ``--out``).  Failures print one
JSON line to stderr and exit 2 (bad input) or 3 (no portfolio beats the
risk-free rate).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys

from .backtest import (METRIC_BASIS, StrategySpec, dirichlet_baseline, fraction_sweep,
                       restrict_week, run_backtest)
from .fixtures import FixtureError, parse_fixtures
from .kelly import KellyProblem, solve_kelly
from .market import MarketError, arbitrage_strategy
from .sharpe import NoPositiveExcess, SharpeProblem, max_sharpe
from .solver import InfeasibleError

EXIT_OK, EXIT_INVALID, EXIT_NO_EXCESS = 0, 2, 3


class UsageError(ValueError):
    kind = "UsageError"


def _num(x, digits: int | None = None):
    """JSON-safe float: non-finite values become the strings 'inf' / '-inf' / 'nan'."""
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return round(x, digits) if digits is not None else x


def _emit(payload, path=None):
    text = json.dumps(payload, indent=2) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _arbitrage_flags(fixtures, week_id):
    flags = []
    for row in fixtures.week_rows(week_id):
        res = arbitrage_strategy(row.odds)
        if res.is_arbitrage:
            flags.append({
                "matchweek": row.matchweek, "home": row.home, "away": row.away,
                "track_take": _num(res.track_take, 6),
                "stakes": dict(zip(row.labels, (_num(s, 6) for s in res.allocation.stakes))),
                "guaranteed_return": _num(res.guaranteed_return, 6),
            })
    return flags


def cmd_optimize(args) -> int:
    fixtures = parse_fixtures(args.fixtures)
    rows = fixtures.week_rows(args.matchweek)
    week = fixtures.matchweek(args.matchweek)
    if args.restricted:
        week = restrict_week(week)
    if args.criterion == "kelly":
        alloc = solve_kelly(KellyProblem.from_week(week, fraction=args.fraction))
    else:
        alloc = max_sharpe(SharpeProblem.from_week(week, fraction=args.fraction))
    stakes = []
    for row, mk, off in zip(rows, week.matches, week.offsets):
        for i in range(mk.m):
            if not mk.bettable[i]:
                continue
            stakes.append({
                "home": row.home, "away": row.away, "outcome": mk.outcome_labels[i],
                "stake": _num(alloc.stakes[off + i], 6), "odds": float(mk.odds[i]),
                "prob": float(mk.probs[i]), "edge": _num(mk.edges[i], 6),
            })
    _emit({
        "matchweek": args.matchweek,
        "criterion": args.criterion,
        "restricted": bool(args.restricted),
        "fraction": args.fraction,
        "stakes": stakes,
        "total_stake": _num(alloc.total, 6),
        "solver": {
            "converged": bool(alloc.converged),
            "iterations": int(alloc.info.get("iterations", 0)),
            "kkt_residual": _num(alloc.info.get("kkt_residual", 0.0)),
        },
        "arbitrage_flags": _arbitrage_flags(fixtures, args.matchweek),
    }, args.out)
    return EXIT_OK


def report_to_json(report, from_week=None, to_week=None) -> dict:
    spec = report.spec
    return {
        "spec": {"criterion": spec.criterion, "restricted": spec.restricted,
                 "fraction": spec.fraction, "from_week": from_week, "to_week": to_week},
        "wealth_path": [_num(w) for w in report.wealth_path],
        "weeks": [{
            "week": w.week, "stake_total": _num(w.stake_total, 6), "gross_return": _num(w.gross_return),
            "pnl": _num(w.pnl), "wealth": _num(w.wealth), "converged": w.converged,
            "sharpe": _num(w.sharpe), "log_growth": _num(w.log_growth),
            "volatility": _num(w.volatility), "note": w.note,
        } for w in report.weeks],
        "bets": [{
            "matchweek": b.matchweek, "match": b.match, "outcome": b.outcome,
            "stake": _num(b.stake, 6), "odds": b.odds, "won": b.won,
        } for b in report.bets],
        "metrics": {k: _num(v) for k, v in report.metrics.items()},
        "metric_basis": dict(METRIC_BASIS),
    }


def cmd_backtest(args) -> int:
    fixtures = parse_fixtures(args.fixtures)
    ids = fixtures.week_ids
    for w in (args.from_week, args.to_week):
        if w is not None and w not in ids:
            raise UsageError(f"matchweek {w} not in fixtures (available {ids[0]}..{ids[-1]})")
    spec = StrategySpec(args.criterion, args.restricted, args.fraction)
    report = run_backtest(fixtures, spec, args.from_week, args.to_week)
    _emit(report_to_json(report, args.from_week, args.to_week), args.report)
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["week", "stake_total", "pnl", "wealth"])
            for w in report.weeks:
                writer.writerow([w.week, f"{w.stake_total:.6f}", repr(w.pnl), repr(w.wealth)])
    return EXIT_OK


def cmd_arb_scan(args) -> int:
    fixtures = parse_fixtures(args.fixtures)
    found = []
    for week_id in fixtures.week_ids:
        found.extend(_arbitrage_flags(fixtures, week_id))
    _emit({"opportunities": found}, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.sims < 1:
        raise UsageError("--sims must be at least 1")
    fixtures = parse_fixtures(args.fixtures)
    reference = None
    if args.reference_report:
        with open(args.reference_report, encoding="utf-8") as fh:
            reference = float(json.load(fh)["metrics"]["final_wealth"])
    res = dirichlet_baseline(fixtures, args.sims, args.fraction, args.seed, reference,
                             args.workers, args.from_week, args.to_week)
    payload = {"sims": args.sims, "seed": args.seed, "fraction": args.fraction,
               "final_wealth": {k: _num(v) for k, v in res.summary().items()}}
    if reference is not None:
        payload["reference_percentile"] = _num(res.reference_percentile)
    _emit(payload, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    fixtures = parse_fixtures(args.fixtures)
    grid = [float(x) for x in args.grid.split(",") if x.strip()]
    spec = StrategySpec(args.criterion, args.restricted, 1.0, args.seed)
    res = fraction_sweep(fixtures, spec, grid, args.mode, args.sims, args.workers)
    _emit({"mode": args.mode, "rows": [{"fraction": f, "median_final_wealth": _num(m)}
                                        for f, m in res["rows"]],
           "argmax": res["argmax"]}, args.out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fraction(text: str) -> float:
    f = float(text)
    if not 0.0 < f <= 1.0:
        raise argparse.ArgumentTypeError("fraction must lie in (0, 1]")
    return f


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="betfolio", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="stakes for one matchweek")
    p.add_argument("--fixtures", required=True)
    p.add_argument("--matchweek", type=int, required=True)
    p.add_argument("--criterion", choices=("kelly", "sharpe"), required=True)
    p.add_argument("--restricted", action="store_true")
    p.add_argument("--fraction", type=_fraction, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("backtest", help="season backtest with reinvestment")
    p.add_argument("--fixtures", required=True)
    p.add_argument("--from-week", type=int)
    p.add_argument("--to-week", type=int)
    p.add_argument("--criterion", choices=("kelly", "sharpe"), required=True)
    p.add_argument("--restricted", action="store_true")
    p.add_argument("--fraction", type=_fraction, default=1.0)
    p.add_argument("--report")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("arb-scan", help="list matches with negative track take")
    p.add_argument("--fixtures", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_arb_scan)

    p = sub.add_parser("simulate", help="Dirichlet random-strategy baseline")
    p.add_argument("--fixtures", required=True)
    p.add_argument("--sims", type=int, required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--reference-report")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--from-week", type=int)
    p.add_argument("--to-week", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="median final wealth over a grid of fractions")
    p.add_argument("--fixtures", required=True)
    p.add_argument("--grid", required=True, help="comma-separated fractions")
    p.add_argument("--mode", choices=("dirichlet", "criterion"), default="dirichlet")
    p.add_argument("--criterion", choices=("kelly", "sharpe"), default="kelly")
    p.add_argument("--restricted", action="store_true")
    p.add_argument("--sims", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def _fail(kind: str, message: str, code: int, row=None) -> int:
    err = {"error": kind, "message": message}
    if row is not None:
        err["row"] = row
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except FixtureError as exc:
        return _fail(exc.kind, str(exc), EXIT_INVALID, exc.row)
    except NoPositiveExcess as exc:
        return _fail("NoPositiveExcess", str(exc), EXIT_NO_EXCESS)
    except UsageError as exc:
        return _fail(exc.kind, str(exc), EXIT_INVALID)
    except (MarketError, InfeasibleError, ValueError, OSError, KeyError) as exc:
        return _fail(type(exc).__name__, str(exc).replace("\n", " "), EXIT_INVALID)


if __name__ == "__main__":
    sys.exit(main())
