"""
Reading per-region case reports and reducing them to daily deltas.

Two CSV layouts are accepted::

    date,region,confirmed,active,recovered,dead          (cumulative)
    date,region,active_delta,recovered_delta,dead_delta  (delta)
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

__all__ = [
    "Mode", "RegionDayRecord", "RegionDayDelta", "RegionSeries",
    "MalformedRow", "DuplicateRegionDate", "UnknownColumn",
    "CUMULATIVE_HEADER", "DELTA_HEADER",
    "parse_snapshot_csv", "build_delta_series", "series_from_deltas",
    "cumulative_from_series", "validate_series", "write_delta_csv",
    "Dataset",
]

CUMULATIVE_HEADER = ("date", "region", "confirmed", "active", "recovered", "dead")
DELTA_HEADER = ("date", "region", "active_delta", "recovered_delta", "dead_delta")


class Mode(enum.Enum):
    CUMULATIVE = "cumulative"
    DELTA = "delta"


class MalformedRow(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class DuplicateRegionDate(ValueError):
    def __init__(self, line: int, region: str, date: dt.date):
        super().__init__(f"line {line}: duplicate row for {region!r} on {date}")
        self.line = line
        self.region = region
        self.date = date


class UnknownColumn(ValueError):
    pass


@dataclass(frozen=True)
class RegionDayRecord:
    date: dt.date
    region: str
    confirmed: int
    active: int
    recovered: int
    dead: int


@dataclass(frozen=True)
class RegionDayDelta:
    date: dt.date
    region: str
    a: int
    r: int
    d: int

    @property
    def triple(self) -> tuple[int, int, int]:
        return self.a, self.r, self.d


@dataclass(frozen=True)
class RegionSeries:
    """One region's deltas in strictly increasing date order."""

    region: str
    deltas: tuple[RegionDayDelta, ...]
    source: tuple[RegionDayRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(self.deltas))
        object.__setattr__(self, "source", tuple(self.source))
        dates = [x.date for x in self.deltas]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError(f"{self.region}: dates must be strictly increasing")
        if any(x.region != self.region for x in self.deltas):
            raise ValueError(f"{self.region}: series contains another region's rows")

    def __len__(self):
        return len(self.deltas)

    def __iter__(self):
        return iter(self.deltas)

    @property
    def dates(self) -> list[dt.date]:
        return [x.date for x in self.deltas]

    def within(self, start: dt.date | None = None, end: dt.date | None = None) -> "RegionSeries":
        keep = [x for x in self.deltas
                if (start is None or x.date >= start) and (end is None or x.date <= end)]
        src = [x for x in self.source
               if (start is None or x.date >= start) and (end is None or x.date <= end)]
        return RegionSeries(self.region, keep, src)


#: region name -> series
Dataset = Mapping[str, RegionSeries]


def _parse_int(value: str, line: int, column: str) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise MalformedRow(line, f"{column}={value!r} is not an integer") from None


def _parse_date(value: str, line: int) -> dt.date:
    try:
        return dt.date.fromisoformat(value.strip())
    except ValueError:
        raise MalformedRow(line, f"date {value!r} is not ISO-8601") from None


def parse_snapshot_csv(text: str | TextIO, mode: Mode | str = Mode.DELTA,
                       aliases: Mapping[str, str] | None = None) -> list:
    """
    Parse a case-report CSV.

    Parameters
    ----------
    text : str or file-like
        CSV content with a header row.
    mode : Mode or {"cumulative", "delta"}
        Selects the expected header and the record type returned.
    aliases : mapping, optional
        Maps variant region spellings to a canonical name, applied after
        whitespace trimming.

    Returns
    -------
    list of RegionDayRecord (cumulative mode) or RegionDayDelta (delta mode),
    in file order.
    """
    mode = Mode(mode)
    aliases = aliases or {}
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise MalformedRow(1, "missing header row")
    header = tuple(h.strip() for h in header)
    expected = CUMULATIVE_HEADER if mode is Mode.CUMULATIVE else DELTA_HEADER
    unknown = [h for h in header if h not in expected]
    if unknown:
        raise UnknownColumn(f"unknown column(s) {unknown} for {mode.value} mode")
    missing = [h for h in expected if h not in header]
    if missing:
        raise MalformedRow(1, f"header lacks column(s) {missing}")
    pos = {h: header.index(h) for h in expected}

    out = []
    seen = set()
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MalformedRow(line, f"expected {len(header)} fields, got {len(row)}")
        date = _parse_date(row[pos["date"]], line)
        region = row[pos["region"]].strip()
        region = aliases.get(region, region)
        if not region:
            raise MalformedRow(line, "empty region")
        if (region, date) in seen:
            raise DuplicateRegionDate(line, region, date)
        seen.add((region, date))
        nums = [_parse_int(row[pos[c]], line, c) for c in expected[2:]]
        if mode is Mode.CUMULATIVE:
            if any(n < 0 for n in nums):
                raise MalformedRow(line, "cumulative counts must be non-negative")
            out.append(RegionDayRecord(date, region, *nums))
        else:
            out.append(RegionDayDelta(date, region, *nums))
    return out


def build_delta_series(records: Iterable[RegionDayRecord]) -> dict[str, RegionSeries]:
    """
    Difference cumulative records between consecutive available dates.

    The first date of a region yields its raw values. Negative recovered or
    dead differences (upstream corrections) are kept as they are.
    """
    by_region = defaultdict(list)
    for rec in records:
        by_region[rec.region].append(rec)
    out = {}
    for region in sorted(by_region):
        recs = sorted(by_region[region], key=lambda r: r.date)
        deltas = []
        prev = None
        for rec in recs:
            if prev is None:
                deltas.append(RegionDayDelta(rec.date, region, rec.active, rec.recovered, rec.dead))
            else:
                deltas.append(RegionDayDelta(rec.date, region, rec.active - prev.active,
                                             rec.recovered - prev.recovered, rec.dead - prev.dead))
            prev = rec
        out[region] = RegionSeries(region, deltas, recs)
    return out


def series_from_deltas(deltas: Iterable[RegionDayDelta]) -> dict[str, RegionSeries]:
    """Group delta rows by region, ordered by region name then date."""
    by_region = defaultdict(list)
    for x in deltas:
        by_region[x.region].append(x)
    return {region: RegionSeries(region, sorted(by_region[region], key=lambda x: x.date))
            for region in sorted(by_region)}


def cumulative_from_series(series: RegionSeries) -> list[RegionDayRecord]:
    """Running sums of a delta series; the inverse of :func:`build_delta_series`."""
    active = recovered = dead = 0
    out = []
    for x in series:
        active += x.a
        recovered += x.r
        dead += x.d
        out.append(RegionDayRecord(x.date, series.region, active + recovered + dead,
                                   active, recovered, dead))
    return out


def validate_series(series: RegionSeries) -> list[str]:
    """Warnings for monotonicity violations, date gaps and confirmed-total mismatches."""
    warnings = []
    for x in series:
        if x.r < 0:
            warnings.append(f"{series.region} {x.date}: recovered decreased by {-x.r}")
        if x.d < 0:
            warnings.append(f"{series.region} {x.date}: dead decreased by {-x.d}")
    dates = series.dates
    for a, b in zip(dates, dates[1:]):
        missing = (b - a).days - 1
        if missing > 0:
            warnings.append(f"{series.region}: {missing} missing date(s) between {a} and {b}")
    for rec in series.source:
        total = rec.active + rec.recovered + rec.dead
        if total != rec.confirmed:
            warnings.append(f"{series.region} {rec.date}: confirmed {rec.confirmed} "
                            f"!= active+recovered+dead {total}")
    return warnings


def write_delta_csv(dataset: Dataset, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(DELTA_HEADER)
    for region in sorted(dataset):
        for x in dataset[region]:
            w.writerow([x.date.isoformat(), region, x.a, x.r, x.d])


def flatten(dataset: Dataset) -> Sequence[RegionDayDelta]:
    return [x for region in sorted(dataset) for x in dataset[region]]
