"""Fixture CSV ingestion and export.

One row per match with best available decimal odds, model probabilities
and (optionally) the observed result.  Rows are grouped into matchweeks.
Leaving both draw columns empty describes a two-outcome market (H, A).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .market import PROB_SUM_TOL, MatchMarket, Matchweek

COLUMNS = (
    "season", "matchweek", "date", "home", "away",
    "odds_home", "odds_draw", "odds_away",
    "prob_home", "prob_draw", "prob_away", "result",
)
OUTCOMES = ("H", "D", "A")


class FixtureError(ValueError):
    kind = "FixtureError"

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(prefix + message)


class MissingColumn(FixtureError):
    kind = "MissingColumn"


class BadOdds(FixtureError):
    kind = "BadOdds"


class BadProbabilitySum(FixtureError):
    kind = "BadProbabilitySum"


class BadResultCode(FixtureError):
    kind = "BadResultCode"


class BadValue(FixtureError):
    kind = "BadValue"


class DuplicateMatch(FixtureError):
    kind = "DuplicateMatch"


@dataclass(frozen=True)
class FixtureRow:
    season: str
    matchweek: int
    date: str
    home: str
    away: str
    odds: tuple[float, ...]
    probs: tuple[float, ...]
    result: str | None = None

    @property
    def match_id(self) -> str:
        return f"{self.home} v {self.away}"

    @property
    def labels(self) -> tuple[str, ...]:
        return OUTCOMES if len(self.odds) == 3 else ("H", "A")

    def to_market(self) -> MatchMarket:
        realized = self.labels.index(self.result) if self.result else None
        return MatchMarket(self.match_id, self.labels, self.odds, self.probs, realized)


class FixtureSet:
    """Validated fixture rows, grouped by matchweek in ascending order."""

    def __init__(self, rows):
        self.rows = list(rows)
        self._weeks: dict[int, list[FixtureRow]] = {}
        for row in self.rows:
            self._weeks.setdefault(row.matchweek, []).append(row)
        self._weeks = dict(sorted(self._weeks.items()))

    def __eq__(self, other):
        return isinstance(other, FixtureSet) and self.rows == other.rows

    @property
    def week_ids(self) -> list[int]:
        return list(self._weeks)

    def week_rows(self, week_id: int) -> list[FixtureRow]:
        try:
            return self._weeks[week_id]
        except KeyError:
            raise FixtureError(f"matchweek {week_id} not present") from None

    def matchweek(self, week_id: int) -> Matchweek:
        return Matchweek(week_id, tuple(r.to_market() for r in self.week_rows(week_id)))

    def matchweeks(self, from_week: int | None = None, to_week: int | None = None) -> list[Matchweek]:
        ids = [w for w in self.week_ids
               if (from_week is None or w >= from_week) and (to_week is None or w <= to_week)]
        return [self.matchweek(w) for w in ids]


def _number(raw: str, column: str, line: int) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise BadValue(f"{column}={raw!r} is not a number", line) from None


def parse_fixtures(path) -> FixtureSet:
    """Read and validate a fixture CSV; errors carry the 1-based file line number."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"missing column(s): {', '.join(missing)}", 1)
        rows = []
        seen: set[tuple[int, str, str]] = set()
        for line, rec in enumerate(reader, start=2):
            two_way = not (rec["odds_draw"] or "").strip() and not (rec["prob_draw"] or "").strip()
            odds_cols = ("odds_home", "odds_away") if two_way else ("odds_home", "odds_draw", "odds_away")
            prob_cols = ("prob_home", "prob_away") if two_way else ("prob_home", "prob_draw", "prob_away")
            odds = tuple(_number(rec[c], c, line) for c in odds_cols)
            for c, o in zip(odds_cols, odds):
                if not o > 1.0:
                    raise BadOdds(f"{c}={rec[c]} must exceed 1", line)
            probs = tuple(_number(rec[c], c, line) for c in prob_cols)
            if any(not 0.0 <= p <= 1.0 for p in probs) or abs(sum(probs) - 1.0) > PROB_SUM_TOL:
                raise BadProbabilitySum(f"probabilities {probs} must lie in [0, 1] and sum to 1", line)
            result = (rec["result"] or "").strip() or None
            allowed = ("H", "A") if two_way else OUTCOMES
            if result is not None and result not in allowed:
                raise BadResultCode(f"result={result!r} must be one of {', '.join(allowed)}", line)
            try:
                week = int(rec["matchweek"])
            except ValueError:
                raise BadValue(f"matchweek={rec['matchweek']!r} is not an integer", line) from None
            key = (week, rec["home"], rec["away"])
            if key in seen:
                raise DuplicateMatch(f"{rec['home']} v {rec['away']} repeated in matchweek {week}", line)
            seen.add(key)
            rows.append(FixtureRow(rec["season"], week, rec["date"], rec["home"], rec["away"],
                                   odds, probs, result))
    return FixtureSet(rows)


def write_fixtures(fixtures: FixtureSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in fixtures.rows:
            odds, probs = list(map(repr, r.odds)), list(map(repr, r.probs))
            if len(odds) == 2:
                odds.insert(1, "")
                probs.insert(1, "")
            writer.writerow([r.season, r.matchweek, r.date, r.home, r.away, *odds, *probs, r.result or ""])


def bundled(name: str) -> Path:
    """Path of a fixture file shipped with the package (``everton_villa_2021.csv``, ``epl_final_day_2021.csv``)."""
    return Path(__file__).parent / "data" / name
