"""Status groupings, state-distribution CSV and transition diagrams in DOT."""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core_model import STATES, HiddenState
from .inference import RegionTransitionProfile
from .learner import PiSeries
from .quantizer import LabeledState

__all__ = [
    "StatusTable", "MissingRegionDate", "status_table", "status_csv", "status_text",
    "distribution_timeseries", "DISTRIBUTION_HEADER", "render_dot", "edge_style",
]

DISTRIBUTION_HEADER = ("date", "healthy", "infected", "symptomatic", "detected")


class MissingRegionDate(KeyError):
    def __init__(self, region, date):
        super().__init__(f"{region!r} has no label on {date}")
        self.region = region
        self.date = date


@dataclass(frozen=True)
class StatusTable:
    as_of_date: dt.date
    buckets: Mapping[HiddenState, tuple[str, ...]]

    def sizes(self) -> dict[HiddenState, int]:
        return {s: len(self.buckets[s]) for s in STATES}

    def region_state(self, region: str) -> HiddenState:
        for s in STATES:
            if region in self.buckets[s]:
                return s
        raise KeyError(region)


def status_table(labels: Mapping[str, Sequence[LabeledState]],
                 as_of: dt.date | None = None) -> StatusTable:
    """
    Bucket regions by their base state on ``as_of``.

    ``as_of`` defaults to the latest date present in ``labels``; every region
    must have a label on that day.
    """
    if not labels:
        raise ValueError("no regions given")
    if as_of is None:
        as_of = max(s.date for seq in labels.values() for s in seq)
    buckets: dict[HiddenState, list[str]] = {s: [] for s in STATES}
    for region in labels:
        hit = [s for s in labels[region] if s.date == as_of]
        if not hit:
            raise MissingRegionDate(region, as_of)
        buckets[hit[-1].base].append(region)
    return StatusTable(as_of, {s: tuple(sorted(v)) for s, v in buckets.items()})


def status_csv(table: StatusTable) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("state", "region"))
    for s in STATES:
        for region in table.buckets[s]:
            w.writerow((s.name.capitalize(), region))
    return out.getvalue()


def status_text(table: StatusTable) -> str:
    """Plain-text table, one column per state, headed ``Healthy(n)``."""
    heads = [f"{s.name.capitalize()}({len(table.buckets[s])})" for s in STATES]
    cols = [list(table.buckets[s]) for s in STATES]
    widths = [max([len(h)] + [len(x) for x in c]) for h, c in zip(heads, cols)]
    depth = max(len(c) for c in cols)
    lines = [f"Status as of {table.as_of_date.isoformat()}",
             "  ".join(h.ljust(w) for h, w in zip(heads, widths)).rstrip(),
             "  ".join("-" * w for w in widths)]
    for k in range(depth):
        cells = [(c[k] if k < len(c) else "").ljust(w) for c, w in zip(cols, widths)]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def distribution_timeseries(pi: PiSeries, include_empty: bool = False) -> str:
    """One CSV row per date with the four state fractions at full precision."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(DISTRIBUTION_HEADER)
    for (d, vec), empty in zip(pi, pi.empty):
        if empty and not include_empty:
            continue
        w.writerow([d.isoformat()] + [_num(x) for x in vec])
    return out.getvalue()


def _num(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


# clockwise corners of the state square
_POS = {HiddenState.HEALTHY: "0,2!", HiddenState.INFECTED: "2,2!",
        HiddenState.SYMPTOMATIC: "2,0!", HiddenState.DETECTED: "0,0!"}
_BENIGN_SELF = {HiddenState.HEALTHY, HiddenState.DETECTED}


def edge_style(src: HiddenState, dst: HiddenState) -> str:
    """
    ``"solid"`` for benign transitions, ``"dashed"`` for concerning ones.

    One step along H -> I -> S -> D -> H is benign and one step back is not.
    Staying put is benign only in H and D. The two-step jumps are benign
    when they land on H or D (S -> H, I -> D) and concerning otherwise.
    """
    if src == dst:
        return "solid" if src in _BENIGN_SELF else "dashed"
    step = (int(dst) - int(src)) % 4
    if step == 1:
        return "solid"
    if step == 3:
        return "dashed"
    return "solid" if dst in _BENIGN_SELF else "dashed"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_dot(profile: RegionTransitionProfile) -> str:
    """Transition diagram for one region; only strictly positive edges are drawn."""
    P = profile.transitions.values
    lines = [f"digraph {_quote(profile.region)} {{",
             "  layout=neato;",
             "  node [shape=circle, fixedsize=true, width=0.6];"]
    for s in STATES:
        lines.append(f"  {s.symbol} [label=\"{s.symbol}\", pos=\"{_POS[s]}\"];")
    for src in STATES:
        for dst in STATES:
            p = float(P[int(src), int(dst)])
            if p > 0:
                lines.append(f"  {src.symbol} -> {dst.symbol} "
                             f"[label=\"{p:.2f}\", style={edge_style(src, dst)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
