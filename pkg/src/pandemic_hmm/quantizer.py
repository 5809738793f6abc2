"""
Deterministic mapping from a region-day delta to a hidden-state label.

The default rule ``paper-v1`` checks, in order:

1. ``(a, r, d) == (0, 0, 0)``: keep the previous day's base state.
2. ``d > 0`` and ``d >= r`` and ``d >= a``: catastrophe, C1 on Healthy when
   ``a <= 0``, otherwise C2 on Symptomatic.
3. ``a < 0``: Healthy.
4. ``r > a``: Detected.
5. ``a > 0``, ``r == 0``, ``d > 0``: Infected.
6. anything else: Symptomatic.

Negative ``r`` or ``d`` count as zero in these comparisons.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, TextIO

from .core_model import CatastropheTag, HiddenState
from .ingest import Dataset, RegionDayDelta, RegionSeries

__all__ = [
    "LabeledState", "RuleConfig", "DEFAULT_RULE", "LABEL_HEADER",
    "register_rule", "available_rules", "quantize_day", "label_series",
    "label_dataset", "write_labels_csv", "read_labels_csv",
]

LABEL_HEADER = ("date", "region", "base_state", "catastrophe", "carried_forward")
DEFAULT_RULE = "paper-v1"

_CATASTROPHE_BASE = {
    CatastropheTag.C1: HiddenState.HEALTHY,
    CatastropheTag.C2: HiddenState.SYMPTOMATIC,
}


@dataclass(frozen=True)
class LabeledState:
    date: dt.date
    region: str
    base: HiddenState
    catastrophe: CatastropheTag = CatastropheTag.NONE
    carried_forward: bool = False

    def __post_init__(self):
        expected = _CATASTROPHE_BASE.get(self.catastrophe)
        if expected is not None and self.base is not expected:
            raise ValueError(f"{self.catastrophe.value} requires base state {expected.symbol}")

    def __str__(self):
        if self.catastrophe is CatastropheTag.NONE:
            return self.base.symbol
        return f"{self.catastrophe.value}({self.base.symbol})"


@dataclass(frozen=True)
class RuleConfig:
    rule_id: str = DEFAULT_RULE
    carry_forward_initial: HiddenState = HiddenState.HEALTHY
    params: Mapping = field(default_factory=dict)


Rule = Callable[[RegionDayDelta, "LabeledState | None", RuleConfig], LabeledState]
_RULES: dict[str, Rule] = {}


def register_rule(rule_id: str):
    """Decorator adding a quantizer under ``rule_id``."""
    def deco(fn: Rule) -> Rule:
        if rule_id in _RULES:
            raise ValueError(f"rule {rule_id!r} already registered")
        _RULES[rule_id] = fn
        return fn
    return deco


def available_rules() -> list[str]:
    return sorted(_RULES)


@register_rule(DEFAULT_RULE)
def _default_rule(delta: RegionDayDelta, prev: LabeledState | None,
                  cfg: RuleConfig) -> LabeledState:
    a, r, d = delta.a, delta.r, delta.d

    def lab(base, tag=CatastropheTag.NONE, carried=False):
        return LabeledState(delta.date, delta.region, base, tag, carried)

    if (a, r, d) == (0, 0, 0):
        base = prev.base if prev is not None else cfg.carry_forward_initial
        return lab(base, carried=True)
    r, d = max(r, 0), max(d, 0)
    if d > 0 and d >= r and d >= a:
        if a <= 0:
            return lab(HiddenState.HEALTHY, CatastropheTag.C1)
        return lab(HiddenState.SYMPTOMATIC, CatastropheTag.C2)
    if a < 0:
        return lab(HiddenState.HEALTHY)
    if r > a:
        return lab(HiddenState.DETECTED)
    if a > 0 and r == 0 and d > 0:
        return lab(HiddenState.INFECTED)
    return lab(HiddenState.SYMPTOMATIC)


def quantize_day(delta: RegionDayDelta, prev: LabeledState | None = None,
                 cfg: RuleConfig = RuleConfig()) -> LabeledState:
    try:
        rule = _RULES[cfg.rule_id]
    except KeyError:
        raise ValueError(f"unknown rule {cfg.rule_id!r}; "
                         f"available: {available_rules()}") from None
    return rule(delta, prev, cfg)


def label_series(series: RegionSeries | Iterable[RegionDayDelta],
                 cfg: RuleConfig = RuleConfig()) -> list[LabeledState]:
    """Label each day in order, threading the previous label through."""
    out = []
    prev = None
    for delta in series:
        prev = quantize_day(delta, prev, cfg)
        out.append(prev)
    return out


def label_dataset(dataset: Dataset, cfg: RuleConfig = RuleConfig()) -> dict[str, list[LabeledState]]:
    return {region: label_series(dataset[region], cfg) for region in sorted(dataset)}


def write_labels_csv(labels: Mapping[str, Iterable[LabeledState]], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(LABEL_HEADER)
    for region in sorted(labels):
        for s in sorted(labels[region], key=lambda s: s.date):
            w.writerow([s.date.isoformat(), s.region, s.base.symbol, s.catastrophe.value,
                        "true" if s.carried_forward else "false"])


def read_labels_csv(stream: TextIO) -> dict[str, list[LabeledState]]:
    """Inverse of :func:`write_labels_csv`; regions and dates come back sorted."""
    reader = csv.DictReader(stream)
    if tuple(reader.fieldnames or ()) != LABEL_HEADER:
        raise ValueError(f"expected header {','.join(LABEL_HEADER)}")
    out: dict[str, list[LabeledState]] = {}
    for row in reader:
        s = LabeledState(
            dt.date.fromisoformat(row["date"]), row["region"].strip(),
            HiddenState.from_symbol(row["base_state"]),
            CatastropheTag(row["catastrophe"] or "none"),
            row["carried_forward"].strip().lower() == "true",
        )
        out.setdefault(s.region, []).append(s)
    return {k: sorted(v, key=lambda s: s.date) for k, v in sorted(out.items())}
