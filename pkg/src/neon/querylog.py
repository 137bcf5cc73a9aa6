"""Query-log curation: privacy filtering and spiking-date detection."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .corpus import read_jsonl
from .dates import DateStamp, parse_datestamp
from .errors import SeriesTooShort

DEFAULT_MIN_USERS = 5
DEFAULT_WINDOW = 3


@dataclass(frozen=True)
class LoggedQuery:
    text: str
    date: DateStamp
    distinct_users: int
    entity: str


@dataclass(frozen=True)
class DailySeries:
    entity: str
    points: tuple[tuple[DateStamp, float], ...]

    def __post_init__(self):
        for (a, _), (b, _) in zip(self.points, self.points[1:]):
            if (b - a).days != 1:
                raise ValueError(f"series for {self.entity} is not consecutive at {a} -> {b}")
        if any(c < 0 for _, c in self.points):
            raise ValueError("counts must be non-negative")

    @classmethod
    def from_counts(cls, entity: str, counts: Mapping[DateStamp, float]) -> "DailySeries":
        """Fill the days between the first and last date with zeros."""
        if not counts:
            return cls(entity, ())
        first, last = min(counts), max(counts)
        days = (last - first).days + 1
        points = []
        for i in range(days):
            day = first + dt.timedelta(days=i)
            points.append((day, counts.get(day, 0)))
        return cls(entity, tuple(points))


def privacy_filter(queries: Iterable[LoggedQuery], min_users: int = DEFAULT_MIN_USERS) -> list[LoggedQuery]:
    """Drop queries issued by fewer than ``min_users`` distinct users."""
    return [q for q in queries if q.distinct_users >= min_users]


def rolling_sums(counts: list, window: int) -> list:
    """Trailing sums; days before the series start count as zero."""
    out, acc = [], 0
    for i, c in enumerate(counts):
        acc += c
        if i >= window:
            acc -= counts[i - window]
        out.append(acc)
    return out


def detect_spikes(series: DailySeries, window: int = DEFAULT_WINDOW) -> list[DateStamp]:
    """Dates whose trailing rolling sum is more than one population SD above the mean.

    Every date gets a sum (the first ``window - 1`` over a shortened window).
    The test runs in exact rational arithmetic, so scaling all counts by a
    positive constant never changes the result.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(series.points) < window:
        raise SeriesTooShort(f"{len(series.points)} points < window {window}")
    sums = rolling_sums([Fraction(c) for _, c in series.points], window)
    n = len(sums)
    total = sum(sums, Fraction(0))
    var_n2 = n * sum((s * s for s in sums), Fraction(0)) - total * total  # n^2 * variance
    flagged = []
    for (day, _), s in zip(series.points, sums):
        lead = n * s - total  # n * (s - mean)
        # s > mean + sd  <=>  lead > sqrt(var_n2)
        if lead > 0 and lead * lead > var_n2:
            flagged.append(day)
    return flagged


def read_log_rows(path: str | Path) -> Iterator[dict]:
    """Rows from ``.csv`` or JSON lines with entity, date, count and optional distinct_users/query."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            yield from csv.DictReader(fh)
    else:
        yield from read_jsonl(path)


def _number(value) -> int | float:
    f = float(value)
    return int(f) if f.is_integer() else f


def series_from_rows(rows: Iterable[dict], min_users: int | None = DEFAULT_MIN_USERS) -> dict[str, DailySeries]:
    """Per-entity daily totals; rows below the privacy threshold are dropped first."""
    totals: dict[str, dict[DateStamp, int | float]] = {}
    for row in rows:
        users = row.get("distinct_users")
        if min_users is not None and users not in (None, "") and int(users) < min_users:
            continue
        day = parse_datestamp(row["date"])
        per = totals.setdefault(str(row["entity"]), {})
        per[day] = per.get(day, 0) + _number(row.get("count", 1))
    return {e: DailySeries.from_counts(e, c) for e, c in sorted(totals.items())}
