"""
Learning ``(A, B, pi)`` from labelled region-days.

The main route is count based: label every region-day with the quantizer,
count day-over-day state transitions pooled across regions, total the
observed symbols per state, and normalise. :func:`refine` iterates
decode-and-recount, and :func:`fit_baum_welch` is the usual EM baseline for
comparison.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .core_model import (
    PUBLISHED_ATOL, STATES, SYMBOLS, HiddenState, HmmModel, ModelMetadata,
    StochasticMatrix, ZeroRowPolicy, normalize_counts, validate_model,
)
from .inference import AllPathsImpossible, viterbi_decode
from .ingest import Dataset, RegionDayDelta, RegionSeries
from .quantizer import LabeledState, RuleConfig, label_series

__all__ = [
    "ObservationBag", "TransitionCounts", "EmissionCounts", "PiSeries", "FitResult",
    "BaumWelchResult", "EmptyWindow", "MissingLabel", "DegenerateModel",
    "NonFiniteLikelihood", "bag_observations", "bag_dataset", "count_transitions",
    "estimate_transition_matrix", "count_emissions", "estimate_emission_matrix",
    "daily_state_distribution", "fit_from_labels", "fit_heuristic", "refine",
    "fit_baum_welch", "windowed_retrain", "window_bounds", "sample_dataset",
    "write_trace_csv",
]

_log = logging.getLogger(__name__)
_DAY = dt.timedelta(days=1)


class EmptyWindow(ValueError):
    pass


class MissingLabel(KeyError):
    def __init__(self, region, date):
        super().__init__(f"no label for {region!r} on {date}")
        self.region = region
        self.date = date


class DegenerateModel(ValueError):
    pass


class NonFiniteLikelihood(ValueError):
    pass


def _in_window(date, window) -> bool:
    if window is None:
        return True
    start, end = window
    return (start is None or date >= start) and (end is None or date <= end)


def _iso(d):
    return d.isoformat() if d is not None else None


@dataclass(frozen=True, eq=False)
class ObservationBag:
    """
    Symbol counts a region emits on one day, ordered A-, A, R, D.

    ``net`` keeps the signed ``(a, r, d)`` triple the bag came from.
    """

    date: dt.date
    region: str
    counts: np.ndarray
    net: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def __getitem__(self, symbol) -> int:
        return int(self.counts[int(symbol)])

    def as_dict(self) -> dict:
        return {s: int(self.counts[int(s)]) for s in SYMBOLS}

    def __eq__(self, other):
        if not isinstance(other, ObservationBag):
            return NotImplemented
        return (self.date, self.region, self.net) == (other.date, other.region, other.net) \
            and np.array_equal(self.counts, other.counts)


def bag_observations(delta: RegionDayDelta) -> ObservationBag:
    a, r, d = delta.a, delta.r, delta.d
    return ObservationBag(delta.date, delta.region,
                          [max(-a, 0), max(a, 0), max(r, 0), max(d, 0)], (a, r, d))


def bag_dataset(dataset: Dataset, window=None) -> dict[str, list[ObservationBag]]:
    return {region: [bag_observations(x) for x in dataset[region] if _in_window(x.date, window)]
            for region in sorted(dataset)}


def _flatten(items) -> Iterable:
    if isinstance(items, Mapping):
        for key in sorted(items):
            yield from items[key]
    else:
        yield from items


@dataclass(frozen=True, eq=False)
class TransitionCounts:
    counts: np.ndarray
    window: tuple = (None, None)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def count_transitions(labels: Mapping[str, Sequence[LabeledState]], window=None) -> TransitionCounts:
    """
    Pool day-over-day transitions across regions.

    A pair counts when the two labels are on consecutive calendar days and
    the later day lies in ``window``; date gaps contribute nothing.
    Catastrophe days count under their base state.
    """
    counts = np.zeros((4, 4), dtype=np.int64)
    for region in sorted(labels):
        seq = sorted(labels[region], key=lambda s: s.date)
        for prev, cur in zip(seq, seq[1:]):
            if cur.date - prev.date == _DAY and _in_window(cur.date, window):
                counts[int(prev.base), int(cur.base)] += 1
    counts.setflags(write=False)
    return TransitionCounts(counts, tuple(window) if window else (None, None))


def estimate_transition_matrix(c: TransitionCounts, smoothing: float = 0.0,
                               zero_row_policy: ZeroRowPolicy = ZeroRowPolicy.ZERO_ROW) -> StochasticMatrix:
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    return normalize_counts(np.asarray(c.counts, dtype=float) + smoothing, zero_row_policy)


@dataclass(frozen=True, eq=False)
class EmissionCounts:
    """Per-state symbol totals; ``net`` holds the signed (a, r, d) sums."""

    counts: np.ndarray
    window: tuple = (None, None)
    net: np.ndarray | None = None


def count_emissions(labels: Mapping[str, Sequence[LabeledState]], bags, window=None,
                    active: str = "net") -> EmissionCounts:
    """
    Total the observed symbols of every labelled day under its base state.

    With ``active="net"`` the signed daily active changes are summed per
    state first; a negative total goes to the A- column with its sign
    flipped and a positive one to the A column. Recovered and dead use
    signed sums as well, floored at zero. ``active="split"`` adds the
    per-day bag counts instead.
    """
    if active not in ("net", "split"):
        raise ValueError("active must be 'net' or 'split'")
    index = {}
    for s in _flatten(labels):
        if _in_window(s.date, window):
            index[(s.region, s.date)] = s
    split = np.zeros((4, 4), dtype=np.int64)
    net = np.zeros((4, 3), dtype=np.int64)
    used = set()
    for bag in _flatten(bags):
        if not _in_window(bag.date, window):
            continue
        key = (bag.region, bag.date)
        if key not in index:
            raise MissingLabel(*key)
        used.add(key)
        i = int(index[key].base)
        split[i] += bag.counts
        net[i] += bag.net
    unlabelled = set(index) - used
    if unlabelled:
        region, date = min(unlabelled)
        raise ValueError(f"label for {region!r} on {date} has no observations")
    if active == "split":
        counts = split
    else:
        counts = np.zeros((4, 4), dtype=np.int64)
        counts[:, 0] = np.maximum(-net[:, 0], 0)
        counts[:, 1] = np.maximum(net[:, 0], 0)
        counts[:, 2:] = np.maximum(net[:, 1:], 0)
    counts.setflags(write=False)
    return EmissionCounts(counts, tuple(window) if window else (None, None), net)


def estimate_emission_matrix(e: EmissionCounts, smoothing: float = 0.0,
                             zero_row_policy: ZeroRowPolicy = ZeroRowPolicy.ZERO_ROW) -> StochasticMatrix:
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    return normalize_counts(np.asarray(e.counts, dtype=float) + smoothing, zero_row_policy,
                            STATES, SYMBOLS)


@dataclass(frozen=True, eq=False)
class PiSeries:
    """
    Cross-region state distribution per date.

    Dates with no reporting region are kept with a zero vector and
    ``empty`` set, and are skipped by :meth:`final` and :meth:`mean`.
    """

    dates: tuple[dt.date, ...]
    vectors: np.ndarray
    n_regions: tuple[int, ...]

    def __len__(self):
        return len(self.dates)

    @property
    def empty(self) -> np.ndarray:
        return np.array([n == 0 for n in self.n_regions], dtype=bool)

    def __iter__(self):
        return iter(zip(self.dates, self.vectors))

    def final(self) -> np.ndarray:
        ok = np.flatnonzero(~self.empty)
        if ok.size == 0:
            raise EmptyWindow("no date with reporting regions")
        return self.vectors[ok[-1]]

    def mean(self) -> np.ndarray:
        return self.vectors[~self.empty].mean(axis=0)


def daily_state_distribution(labels: Mapping[str, Sequence[LabeledState]], window=None) -> PiSeries:
    per_date: dict[dt.date, np.ndarray] = {}
    for s in _flatten(labels):
        if _in_window(s.date, window):
            per_date.setdefault(s.date, np.zeros(4, dtype=np.int64))[int(s.base)] += 1
    start = window[0] if window and window[0] else (min(per_date) if per_date else None)
    end = window[1] if window and window[1] else (max(per_date) if per_date else None)
    dates = []
    if start is not None and end is not None:
        d = start
        while d <= end:
            dates.append(d)
            d += _DAY
    vecs = np.zeros((len(dates), 4))
    ns = []
    for k, d in enumerate(dates):
        c = per_date.get(d)
        n = int(c.sum()) if c is not None else 0
        ns.append(n)
        if n:
            vecs[k] = c / n
    vecs.setflags(write=False)
    return PiSeries(tuple(dates), vecs, tuple(ns))


@dataclass(frozen=True, eq=False)
class FitResult:
    model: HmmModel
    pi_series: PiSeries
    labels: dict
    transitions: TransitionCounts
    emissions: EmissionCounts


def _window_of(labels, window):
    dates = sorted({s.date for s in _flatten(labels) if _in_window(s.date, window)})
    if len(dates) < 2:
        raise EmptyWindow(f"window {window} holds {len(dates)} labelled date(s); need >= 2")
    start = window[0] if window and window[0] else dates[0]
    end = window[1] if window and window[1] else dates[-1]
    return start, end


def fit_from_labels(labels: Mapping[str, Sequence[LabeledState]], bags, window=None,
                    smoothing: float = 0.0, rule_id: str | None = None,
                    active: str = "net", method: str = "heuristic") -> FitResult:
    """Estimate a model from given labels and bags over an inclusive date window."""
    start, end = _window_of(labels, window)
    labels = {r: [s for s in labels[r] if start <= s.date <= end] for r in sorted(labels)}
    labels = {r: v for r, v in labels.items() if v}
    trans = count_transitions(labels, (start + _DAY, end))
    emis = count_emissions(labels, bags, (start, end), active=active)
    pis = daily_state_distribution(labels, (start, end))
    model = HmmModel(
        estimate_transition_matrix(trans, smoothing),
        estimate_emission_matrix(emis, smoothing),
        pis.final(),
        ModelMetadata(_iso(start), _iso(end), rule_id, method=method),
    )
    return FitResult(model, pis, labels, trans, emis)


def _restrict(dataset: Dataset, window) -> dict[str, RegionSeries]:
    out = {}
    for region in sorted(dataset):
        kept = [x for x in dataset[region] if _in_window(x.date, window)]
        if kept:
            out[region] = RegionSeries(region, kept)
    return out


def fit_heuristic(dataset: Dataset, window=None, cfg: RuleConfig = RuleConfig(),
                  smoothing: float = 0.0, labels: Mapping | None = None,
                  active: str = "net") -> FitResult:
    """
    Label, count and normalise in one pass over the window.

    Labelling restarts at the window's first date from
    ``cfg.carry_forward_initial``. Pass ``labels`` to use externally supplied
    labels instead of the quantizer.
    """
    data = _restrict(dataset, window)
    if not data:
        raise EmptyWindow(f"no observations in window {window}")
    if labels is None:
        labels = {r: label_series(data[r], cfg) for r in data}
        rule_id = cfg.rule_id
    else:
        rule_id = "external-labels"
    return fit_from_labels(labels, bag_dataset(data), window, smoothing, rule_id, active)


def _relabel(model: HmmModel, bags: Mapping[str, Sequence[ObservationBag]]) -> dict:
    out = {}
    for region in sorted(bags):
        seq = bags[region]
        if not seq:
            continue
        try:
            path = viterbi_decode(model, seq, region)
        except AllPathsImpossible as e:
            raise DegenerateModel(f"{region}: {e}") from None
        out[region] = [LabeledState(b.date, region, s) for b, s in zip(seq, path.states)]
    return out


def _base_key(labels) -> dict:
    return {(s.region, s.date): s.base for s in _flatten(labels)}


def refine(model: HmmModel, dataset: Dataset, window=None, max_iters: int = 10,
           tol: float = 0.0, labels: Mapping | None = None,
           zero_row_policy: ZeroRowPolicy = ZeroRowPolicy.ZERO_ROW,
           smoothing: float = 0.0) -> HmmModel:
    """
    Alternate Viterbi relabelling and count re-estimation.

    Stops when the decoded labels repeat (the model is then returned
    unchanged), when no entry of ``A`` or ``B`` moves by more than ``tol``,
    or after ``max_iters`` relabel-and-recount passes. ``labels``, when
    given, are the labels ``model`` was fitted from.

    Raises
    ------
    DegenerateModel
        If ``B`` has an unvisited row and ``zero_row_policy`` is
        ``ZERO_ROW``, or if some region's observations are impossible
        under the current model.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    problems = validate_model(model, atol=PUBLISHED_ATOL)
    if problems:
        raise ValueError("invalid model: " + "; ".join(problems))
    data = _restrict(dataset, window)
    if not data:
        raise EmptyWindow(f"no observations in window {window}")
    bags = bag_dataset(data)
    start, end = _window_of({r: [LabeledState(b.date, r, HiddenState.HEALTHY) for b in v]
                             for r, v in bags.items()}, window)

    def decodable(m: HmmModel) -> HmmModel:
        if any(m.B.unvisited):
            if zero_row_policy is ZeroRowPolicy.ZERO_ROW:
                raise DegenerateModel("emission matrix has an unvisited state row; "
                                      "use the uniform zero-row policy to decode")
            m = m.replace(B=m.B.with_uniform_rows())
        return m

    prev = None
    if labels is not None:
        prev = {k: v for k, v in _base_key(labels).items() if start <= k[1] <= end}
    current = model
    rule_id = model.metadata.rule_id
    for it in range(1, max_iters + 1):
        new_labels = _relabel(decodable(current), bags)
        key = _base_key(new_labels)
        if key == prev:
            _log.debug("refine: labels repeated after %d iteration(s)", it)
            return current.replace(metadata=_refined_meta(current, it, start, end, rule_id))
        fit = fit_from_labels(new_labels, bags, (start, end), smoothing, rule_id,
                              method="refined")
        moved = max(fit.model.A.max_abs_diff(current.A), fit.model.B.max_abs_diff(current.B))
        current = fit.model
        prev = key
        if moved <= tol:
            break
    return current.replace(metadata=_refined_meta(current, it, start, end, rule_id))


def _refined_meta(m: HmmModel, iterations, start, end, rule_id) -> ModelMetadata:
    return ModelMetadata(_iso(start), _iso(end), rule_id, method="refined",
                         iterations=iterations, extra=dict(m.metadata.extra))


@dataclass(frozen=True, eq=False)
class BaumWelchResult:
    model: HmmModel
    trace: list[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


def _sequences(dataset: Dataset, window) -> list[np.ndarray]:
    out = []
    for region in sorted(dataset):
        c = [bag_observations(x).counts for x in dataset[region] if _in_window(x.date, window)]
        if c:
            out.append(np.array(c, dtype=float))
    return out


def _e_step(A, B, pi, seqs):
    """Sufficient statistics and total log-likelihood, with per-day rescaling."""
    logB = np.log(B, out=np.full_like(B, -np.inf), where=B > 0)
    pi_acc = np.zeros(4)
    A_acc = np.zeros((4, 4))
    B_acc = np.zeros((4, 4))
    parts = []
    for C in seqs:
        T = len(C)
        with np.errstate(invalid="ignore"):
            logE = np.where(C[:, None, :] > 0, C[:, None, :] * logB[None], 0.0).sum(axis=2)
        shift = logE.max(axis=1, keepdims=True)
        if not np.all(np.isfinite(shift)):
            raise NonFiniteLikelihood("a day has probability zero in every state")
        E = np.exp(logE - shift)
        alpha = np.empty((T, 4))
        scale = np.empty(T)
        a = pi * E[0]
        for t in range(T):
            if t:
                a = (alpha[t - 1] @ A) * E[t]
            scale[t] = a.sum()
            if not scale[t] > 0:
                raise NonFiniteLikelihood("observation sequence has probability zero")
            alpha[t] = a / scale[t]
        beta = np.empty((T, 4))
        beta[-1] = 1.0
        for t in range(T - 2, -1, -1):
            beta[t] = (A @ (E[t + 1] * beta[t + 1])) / scale[t + 1]
        gamma = alpha * beta
        gamma /= gamma.sum(axis=1, keepdims=True)
        if T > 1:
            xi = (alpha[:-1, :, None] * A[None] * (E[1:] * beta[1:])[:, None, :]
                  / scale[1:, None, None])
            A_acc += xi.sum(axis=0)
        pi_acc += gamma[0]
        B_acc += gamma.T @ C
        parts.extend(np.log(scale).tolist())
        parts.extend(shift[:, 0].tolist())
    return math.fsum(parts), pi_acc, A_acc, B_acc


def _normalise_rows(x):
    s = x.sum(axis=-1, keepdims=True)
    return np.divide(x, s, out=np.full_like(x, 1.0 / x.shape[-1]), where=s > 0)


def fit_baum_welch(dataset: Dataset, init: HmmModel, window=None, max_iters: int = 100,
                   tol: float = 1e-6) -> BaumWelchResult:
    """
    Expectation-maximisation over all region sequences jointly.

    Each region is an independent sequence sharing ``(A, B, pi)``. The trace
    holds the log-likelihood of the initial model followed by one entry per
    M-step; iteration stops once the gain drops below ``tol``.

    Raises
    ------
    NonFiniteLikelihood
        If ``init`` gives zero probability to an observed symbol or to the
        data as a whole.
    """
    seqs = _sequences(dataset, window)
    if not seqs:
        raise EmptyWindow(f"no observations in window {window}")
    A, B, pi = (np.array(init.A.values), np.array(init.B.values), np.array(init.pi))
    if np.any(A <= 0) or np.any(pi <= 0):
        raise ValueError("initial A and pi must be strictly positive")
    observed = np.concatenate(seqs).sum(axis=0) > 0
    if np.any(B[:, observed] <= 0):
        raise NonFiniteLikelihood("initial B gives zero probability to an observed symbol")

    ll, pi_acc, A_acc, B_acc = _e_step(A, B, pi, seqs)
    trace = [ll]
    for _ in range(max_iters):
        pi = pi_acc / pi_acc.sum()
        A = _normalise_rows(A_acc)
        B = _normalise_rows(B_acc)
        ll_new, pi_acc, A_acc, B_acc = _e_step(A, B, pi, seqs)
        trace.append(ll_new)
        if ll_new - ll < tol:
            break
        ll = ll_new
    dates = sorted({x.date for s in dataset.values() for x in s if _in_window(x.date, window)})
    model = HmmModel.from_arrays(A, B, pi, ModelMetadata(
        _iso(dates[0]), _iso(dates[-1]), init.metadata.rule_id,
        method="baum-welch", iterations=len(trace) - 1))
    return BaumWelchResult(model, trace)


def write_trace_csv(trace: Sequence[float], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("iteration", "log_likelihood"))
    for i, ll in enumerate(trace):
        w.writerow([i, repr(float(ll))])


def window_bounds(first: dt.date, last: dt.date, window_length: int = 14,
                  stride: int = 14) -> list[tuple[dt.date, dt.date]]:
    """
    Inclusive windows ``[s, s + window_length - 1]`` stepping by ``stride``.

    The last window is clipped at ``last``. A trailing window that would
    cover a single day is dropped, since a fit needs two dates.
    """
    if window_length < 2:
        raise ValueError("window_length must be >= 2 days")
    if stride < 1:
        raise ValueError("stride must be >= 1 day")
    out = []
    s = first
    while s < last or (s == first == last):
        out.append((s, min(s + (window_length - 1) * _DAY, last)))
        s += stride * _DAY
    return out


def windowed_retrain(dataset: Dataset, window_length: int = 14, stride: int = 14,
                     cfg: RuleConfig = RuleConfig(), smoothing: float = 0.0,
                     start: dt.date | None = None, end: dt.date | None = None) -> list[HmmModel]:
    """
    One model per window, each fitted only on its own dates.

    A model stamped ``[s, e]`` is meant for the days after ``e``.
    """
    dates = sorted({x.date for s in dataset.values() for x in s})
    if not dates:
        raise EmptyWindow("dataset is empty")
    first = start or dates[0]
    last = end or dates[-1]
    return [fit_heuristic(dataset, w, cfg, smoothing).model
            for w in window_bounds(first, last, window_length, stride)]


def sample_dataset(model: HmmModel, n_regions: int, n_days: int, rng: np.random.Generator,
                   mean_symbols: float = 40.0, start: dt.date = dt.date(2020, 1, 1),
                   ) -> tuple[dict[str, RegionSeries], dict[str, np.ndarray]]:
    """
    Draw region sequences from ``model``.

    Each day draws ``1 + Poisson(mean_symbols)`` symbols from the state's
    emission row. A- and A counts net into one signed active change, the
    way a real report would carry them.

    Returns the dataset and the true state indices per region.
    """
    A, B, pi = model.A.with_uniform_rows().values, model.B.values, model.pi
    data, truth = {}, {}
    width = len(str(n_regions - 1))
    for k in range(n_regions):
        region = f"region-{k:0{width}d}"
        states = np.empty(n_days, dtype=int)
        states[0] = rng.choice(4, p=pi)
        for t in range(1, n_days):
            states[t] = rng.choice(4, p=A[states[t - 1]])
        deltas = []
        for t, s in enumerate(states):
            c = rng.multinomial(1 + rng.poisson(mean_symbols), B[s])
            deltas.append(RegionDayDelta(start + t * _DAY, region,
                                         int(c[1] - c[0]), int(c[2]), int(c[3])))
        data[region] = RegionSeries(region, deltas)
        truth[region] = states
    return data, truth
