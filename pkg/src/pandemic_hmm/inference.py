"""
Evaluation and decoding over sequences of daily observation bags.

A day's bag is a multiset of symbols, so its log-likelihood in state ``s``
is ``sum_k count[k] * log B[s, k]``. Everything is computed in log space;
bags with thousands of symbols are routine.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np
from scipy.special import logsumexp

from .core_model import STATES, HiddenState, HmmModel, StochasticMatrix, normalize_counts, ZeroRowPolicy

__all__ = [
    "NEG_INF", "AllPathsImpossible", "InsufficientData", "DecodedPath",
    "RegionTransitionProfile", "day_log_emission", "log_emission_table",
    "forward_log_likelihood", "viterbi_decode", "region_transition_profile",
    "write_paths_csv", "decoding_matrices",
]

NEG_INF = -math.inf


class AllPathsImpossible(ValueError):
    pass


class InsufficientData(ValueError):
    pass


def _counts(bag) -> np.ndarray:
    return np.asarray(getattr(bag, "counts", bag), dtype=float)


def day_log_emission(state: HiddenState, bag, B: StochasticMatrix) -> float:
    """``log P(bag | state)``; :data:`NEG_INF` if a present symbol has probability zero."""
    c = _counts(bag)
    row = B.values[int(state)]
    present = c > 0
    if np.any(row[present] == 0):
        return NEG_INF
    return float(np.sum(c[present] * np.log(row[present])))


def _safe_log(x) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=float))


def log_emission_table(bags: Sequence, B: StochasticMatrix) -> np.ndarray:
    """(T, 4) table of per-day, per-state emission log-likelihoods."""
    C = np.array([_counts(b) for b in bags], dtype=float).reshape(-1, B.shape[1])
    logB = _safe_log(B.values)
    # 0 * log 0 contributes nothing
    with np.errstate(invalid="ignore"):
        terms = np.where(C[:, None, :] > 0, C[:, None, :] * logB[None, :, :], 0.0)
    return terms.sum(axis=2)


def decoding_matrices(model: HmmModel) -> tuple[np.ndarray, np.ndarray]:
    """Log ``A`` (unvisited rows made uniform, with a warning) and log ``pi``."""
    A = model.A
    if any(A.unvisited):
        empty = [getattr(l, "symbol", l) for l, u in zip(A.row_labels, A.unvisited) if u]
        warnings.warn(f"transition rows {empty} are unvisited; decoding with uniform rows",
                      stacklevel=3)
        A = A.with_uniform_rows()
    return _safe_log(A.values), _safe_log(model.pi)


def forward_log_likelihood(model: HmmModel, bags: Sequence) -> float:
    """Log-probability of the bag sequence summed over all state paths."""
    if len(bags) == 0:
        raise ValueError("sequence must be non-empty")
    logA, logpi = decoding_matrices(model)
    logE = log_emission_table(bags, model.B)
    alpha = logpi + logE[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        for t in range(1, len(logE)):
            alpha = logsumexp(alpha[:, None] + logA, axis=0) + logE[t]
        ll = float(logsumexp(alpha))
    if not math.isfinite(ll):
        raise AllPathsImpossible("observation sequence has probability zero under the model")
    return ll


@dataclass(frozen=True)
class DecodedPath:
    region: str
    steps: tuple[tuple[dt.date | None, HiddenState], ...]
    log_probability: float
    log_prob_cumulative: tuple[float, ...] = ()

    def __len__(self):
        return len(self.steps)

    @property
    def states(self) -> list[HiddenState]:
        return [s for _, s in self.steps]


def viterbi_decode(model: HmmModel, bags: Sequence, region: str = "",
                   dates: Sequence[dt.date] | None = None) -> DecodedPath:
    """
    Most probable state path for ``bags``.

    Ties are resolved toward the earlier state in H, I, S, D order, both
    for the final state and for every back-pointer.
    """
    T = len(bags)
    if T == 0:
        raise ValueError("sequence must be non-empty")
    if dates is None:
        dates = [getattr(b, "date", None) for b in bags]
    logA, logpi = decoding_matrices(model)
    logE = log_emission_table(bags, model.B)
    n = len(STATES)
    delta = np.empty((T, n))
    back = np.zeros((T, n), dtype=int)
    delta[0] = logpi + logE[0]
    for t in range(1, T):
        scores = delta[t - 1][:, None] + logA
        back[t] = np.argmax(scores, axis=0)
        delta[t] = scores[back[t], np.arange(n)] + logE[t]
    last = int(np.argmax(delta[-1]))
    best = float(delta[-1, last])
    if not math.isfinite(best):
        raise AllPathsImpossible("observation sequence has probability zero under the model")
    path = [last]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    cumulative = []
    acc = 0.0
    for t, s in enumerate(path):
        acc += (logpi[s] if t == 0 else logA[path[t - 1], s]) + logE[t, s]
        cumulative.append(float(acc))
    return DecodedPath(region, tuple((d, STATES[s]) for d, s in zip(dates, path)),
                       best, tuple(cumulative))


def write_paths_csv(paths: Iterable[DecodedPath], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("date", "region", "state", "log_prob_cumulative"))
    for p in sorted(paths, key=lambda p: p.region):
        for (d, s), lp in zip(p.steps, p.log_prob_cumulative):
            w.writerow([d.isoformat() if d else "", p.region, s.symbol, repr(lp)])


@dataclass(frozen=True)
class RegionTransitionProfile:
    region: str
    transitions: StochasticMatrix
    counts: np.ndarray
    occupancy: np.ndarray
    window: tuple[dt.date | None, dt.date | None]

    def frequency(self, src: HiddenState, dst: HiddenState) -> float:
        return float(self.transitions.values[int(src), int(dst)])


def region_transition_profile(labels: Sequence, window=None) -> RegionTransitionProfile:
    """
    Empirical transition frequencies and state occupancy for one region.

    Pairs are formed from consecutive entries of ``labels``. A list sampled
    at irregular dates (a weekly summary, say) therefore pairs each entry
    with the next reported one.
    """
    start, end = window if window is not None else (None, None)
    kept = [s for s in labels
            if (start is None or s.date >= start) and (end is None or s.date <= end)]
    if len(kept) < 2:
        raise InsufficientData(f"need at least 2 labelled days, got {len(kept)}")
    regions = {s.region for s in kept}
    if len(regions) != 1:
        raise ValueError(f"labels span several regions: {sorted(regions)}")
    counts = np.zeros((4, 4), dtype=int)
    for prev, cur in zip(kept, kept[1:]):
        counts[int(prev.base), int(cur.base)] += 1
    occupancy = np.bincount([int(s.base) for s in kept], minlength=4) / len(kept)
    return RegionTransitionProfile(
        regions.pop(), normalize_counts(counts, ZeroRowPolicy.ZERO_ROW), counts,
        occupancy, (kept[0].date, kept[-1].date))


def region_transition_profiles(labels: Mapping[str, Sequence], window=None) -> dict:
    out = {}
    for region in sorted(labels):
        try:
            out[region] = region_transition_profile(labels[region], window)
        except InsufficientData:
            continue
    return out
