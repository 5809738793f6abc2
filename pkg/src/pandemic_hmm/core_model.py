"""
State and symbol alphabets, row-stochastic matrices and the HMM triple.

Matrix rows are always indexed H, I, S, D and emission columns A-, A, R, D.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

__all__ = [
    "HiddenState", "CatastropheTag", "ObservationSymbol", "ZeroRowPolicy",
    "StochasticMatrix", "ModelMetadata", "HmmModel",
    "NegativeEntry", "RowSumViolation",
    "make_stochastic_matrix", "normalize_counts", "validate_model",
    "STATES", "SYMBOLS", "ROW_SUM_ATOL", "PUBLISHED_ATOL",
]

#: Tolerance used when constructing a matrix from floating point rows.
ROW_SUM_ATOL = 1e-6
#: Tolerance for values printed to three decimals.
PUBLISHED_ATOL = 2e-3


class HiddenState(enum.IntEnum):
    HEALTHY = 0
    INFECTED = 1
    SYMPTOMATIC = 2
    DETECTED = 3

    @property
    def symbol(self) -> str:
        return "HISD"[self.value]

    @classmethod
    def from_symbol(cls, symbol: str) -> "HiddenState":
        try:
            return cls("HISD".index(symbol.strip().upper()))
        except ValueError:
            raise ValueError(f"unknown hidden state symbol {symbol!r}") from None


class CatastropheTag(enum.Enum):
    NONE = "none"
    C1 = "C1"
    C2 = "C2"


class ObservationSymbol(enum.IntEnum):
    ACTIVE_MINUS = 0
    ACTIVE = 1
    RECOVERED = 2
    DEAD = 3

    @property
    def symbol(self) -> str:
        return ("A-", "A", "R", "D")[self.value]

    @classmethod
    def from_symbol(cls, symbol: str) -> "ObservationSymbol":
        try:
            return cls(("A-", "A", "R", "D").index(symbol.strip()))
        except ValueError:
            raise ValueError(f"unknown observation symbol {symbol!r}") from None


STATES = tuple(HiddenState)
SYMBOLS = tuple(ObservationSymbol)


class ZeroRowPolicy(enum.Enum):
    """What to do with a count row whose total is zero."""

    ZERO_ROW = "zero"
    UNIFORM = "uniform"


class NegativeEntry(ValueError):
    pass


class RowSumViolation(ValueError):
    def __init__(self, row_label, total):
        super().__init__(f"row {row_label!r} sums to {total!r}, not 1")
        self.row_label = row_label
        self.total = total


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """
    Row-stochastic table with labelled rows and columns.

    A row that is entirely zero is allowed and reported through
    :attr:`unvisited`; every other row sums to one.
    """

    values: np.ndarray
    row_labels: tuple
    col_labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))

    @property
    def shape(self):
        return self.values.shape

    @property
    def unvisited(self) -> tuple[bool, ...]:
        return tuple(bool(not row.any()) for row in self.values)

    def row(self, label) -> np.ndarray:
        return self.values[self.row_labels.index(label)]

    def __getitem__(self, key):
        return self.values[key]

    def __eq__(self, other):
        if not isinstance(other, StochasticMatrix):
            return NotImplemented
        return (self.row_labels == other.row_labels
                and self.col_labels == other.col_labels
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.row_labels, self.col_labels, self.values.tobytes()))

    def with_uniform_rows(self) -> "StochasticMatrix":
        """Copy with every unvisited row replaced by the uniform distribution."""
        v = np.array(self.values)
        n = v.shape[1]
        for i, empty in enumerate(self.unvisited):
            if empty:
                v[i] = 1.0 / n
        return StochasticMatrix(v, self.row_labels, self.col_labels)

    def max_abs_diff(self, other) -> float:
        other = other.values if isinstance(other, StochasticMatrix) else np.asarray(other)
        return float(np.max(np.abs(self.values - other)))


def make_stochastic_matrix(rows, row_labels: Sequence, col_labels: Sequence,
                           atol: float = ROW_SUM_ATOL) -> StochasticMatrix:
    """
    Validate ``rows`` and wrap them as a :class:`StochasticMatrix`.

    Raises
    ------
    NegativeEntry
        If any entry is below zero.
    RowSumViolation
        If a row that is not all-zero sums to something other than 1
        beyond ``atol``.
    """
    values = np.asarray(rows, dtype=float)
    if values.ndim != 2:
        raise ValueError("rows must form a rectangular 2-d table")
    if values.shape != (len(row_labels), len(col_labels)):
        raise ValueError(
            f"table shape {values.shape} does not match labels "
            f"({len(row_labels)}, {len(col_labels)})")
    if not np.all(np.isfinite(values)):
        raise ValueError("entries must be finite")
    if np.any(values < 0):
        i, j = np.argwhere(values < 0)[0]
        raise NegativeEntry(f"negative entry {values[i, j]!r} at "
                            f"({row_labels[i]!r}, {col_labels[j]!r})")
    for label, row in zip(row_labels, values):
        if row.any() and abs(row.sum() - 1.0) > atol:
            raise RowSumViolation(label, float(row.sum()))
    return StochasticMatrix(values, row_labels, col_labels)


def normalize_counts(counts, zero_row_policy: ZeroRowPolicy = ZeroRowPolicy.ZERO_ROW,
                     row_labels: Sequence = STATES,
                     col_labels: Sequence = STATES) -> StochasticMatrix:
    """Divide each count row by its total."""
    c = np.asarray(counts, dtype=float)
    if np.any(c < 0):
        raise NegativeEntry("counts must be non-negative")
    totals = c.sum(axis=1, keepdims=True)
    out = np.divide(c, totals, out=np.zeros_like(c), where=totals > 0)
    if zero_row_policy is ZeroRowPolicy.UNIFORM:
        out[totals[:, 0] == 0] = 1.0 / c.shape[1]
    return StochasticMatrix(out, row_labels, col_labels)


@dataclass(frozen=True)
class ModelMetadata:
    window_start: str | None = None
    window_end: str | None = None
    rule_id: str | None = None
    method: str | None = None
    iterations: int | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"window_start": self.window_start, "window_end": self.window_end,
             "rule_id": self.rule_id}
        if self.method is not None:
            d["method"] = self.method
        if self.iterations is not None:
            d["iterations"] = self.iterations
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelMetadata":
        d = dict(d)
        known = {k: d.pop(k, None) for k in
                 ("window_start", "window_end", "rule_id", "method", "iterations")}
        return cls(**known, extra=d)


@dataclass(frozen=True, eq=False)
class HmmModel:
    """Transition matrix ``A``, emission matrix ``B`` and initial distribution ``pi``."""

    A: StochasticMatrix
    B: StochasticMatrix
    pi: np.ndarray
    metadata: ModelMetadata = field(default_factory=ModelMetadata)

    def __post_init__(self):
        object.__setattr__(self, "pi", _frozen(self.pi))

    def __eq__(self, other):
        if not isinstance(other, HmmModel):
            return NotImplemented
        return (self.A == other.A and self.B == other.B
                and np.array_equal(self.pi, other.pi)
                and self.metadata == other.metadata)

    @classmethod
    def from_arrays(cls, A, B, pi, metadata: ModelMetadata | None = None,
                    atol: float = ROW_SUM_ATOL) -> "HmmModel":
        return cls(make_stochastic_matrix(A, STATES, STATES, atol=atol),
                   make_stochastic_matrix(B, STATES, SYMBOLS, atol=atol),
                   np.asarray(pi, dtype=float),
                   metadata or ModelMetadata())

    def replace(self, **changes) -> "HmmModel":
        fields = {"A": self.A, "B": self.B, "pi": self.pi, "metadata": self.metadata}
        fields.update(changes)
        return HmmModel(**fields)

    def to_dict(self) -> dict:
        return {
            "states": [s.symbol for s in STATES],
            "symbols": [s.symbol for s in SYMBOLS],
            "A": self.A.values.tolist(),
            "B": self.B.values.tolist(),
            "pi": self.pi.tolist(),
            "metadata": self.metadata.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping, atol: float = ROW_SUM_ATOL) -> "HmmModel":
        if list(d.get("states", [])) != [s.symbol for s in STATES]:
            raise ValueError(f"unexpected state order {d.get('states')!r}")
        if list(d.get("symbols", [])) != [s.symbol for s in SYMBOLS]:
            raise ValueError(f"unexpected symbol order {d.get('symbols')!r}")
        return cls.from_arrays(d["A"], d["B"], d["pi"],
                               ModelMetadata.from_dict(d.get("metadata", {})),
                               atol=atol)

    def to_json(self) -> str:
        # repr-precision floats: the round trip is exact
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, text: str, atol: float = ROW_SUM_ATOL) -> "HmmModel":
        return cls.from_dict(json.loads(text), atol=atol)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path, atol: float = ROW_SUM_ATOL) -> "HmmModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"), atol=atol)


def validate_model(m: HmmModel, atol: float = 1e-9) -> list[str]:
    """
    Check the model invariants and describe every defect found.

    All-zero rows of ``A`` or ``B`` are accepted as unvisited states.
    """
    problems = []
    for name, mat, shape in (("A", m.A, (4, 4)), ("B", m.B, (4, 4))):
        v = mat.values
        if v.shape != shape:
            problems.append(f"{name}: shape {v.shape}, expected {shape}")
            continue
        for label, row in zip(mat.row_labels, v):
            label = getattr(label, "symbol", label)
            if np.any(row < 0):
                problems.append(f"{name}[{label}]: negative entry")
            elif not np.all(np.isfinite(row)):
                problems.append(f"{name}[{label}]: non-finite entry")
            elif row.any() and abs(row.sum() - 1.0) > atol:
                problems.append(f"{name}[{label}]: row sums to {row.sum():.12g}")
    pi = m.pi
    if pi.shape != (4,):
        problems.append(f"pi: shape {pi.shape}, expected (4,)")
    elif np.any(pi < 0):
        problems.append("pi: negative entry")
    elif abs(pi.sum() - 1.0) > atol:
        problems.append(f"pi: sums to {pi.sum():.12g}")
    return problems
