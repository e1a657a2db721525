"""Schemas, assignments, datasets, and sufficient-statistics counting.

Conventions shared by the whole toolkit:

* Variables are identified by their position in the schema.
* An assignment is a sequence of ints with one entry per schema variable;
  the sentinel UNKNOWN (-1) marks an unobserved value.
* Dense tables are stored row-major with the LAST scope variable changing
  fastest, matching the layout used by the file formats.
* Every logarithmic quantity anywhere in the toolkit is a natural log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    InvalidScopeError,
    SchemaMismatchError,
    UndefinedDistributionError,
    ValidationError,
)

UNKNOWN = -1
LOG_ZERO = float("-inf")


def log_add(a: float, b: float) -> float:
    """Stable log(exp(a) + exp(b)) for scalars."""
    if a == LOG_ZERO:
        return b
    if b == LOG_ZERO:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def log_sum(values: Iterable[float]) -> float:
    """Stable log-sum-exp of an iterable of floats."""
    vals = list(values)
    if not vals:
        return LOG_ZERO
    m = max(vals)
    if m == LOG_ZERO:
        return LOG_ZERO
    return m + math.log(sum(math.exp(v - m) for v in vals))


def log_sum_exp(arr: np.ndarray, axis=None):
    """Log-sum-exp over a numpy array, safe for -inf entries."""
    arr = np.asarray(arr, dtype=float)
    m = np.max(arr, axis=axis, keepdims=True) if arr.size else np.float64(LOG_ZERO)
    if arr.size == 0:
        return LOG_ZERO
    safe = np.where(np.isneginf(m), 0.0, m)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = safe + np.log(np.sum(np.exp(arr - safe), axis=axis, keepdims=True))
    out = np.where(np.isneginf(m), LOG_ZERO, out)
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def log_normalize(arr: np.ndarray) -> np.ndarray:
    """Shift a log vector so its exponentials sum to one."""
    total = log_sum_exp(arr)
    if total == LOG_ZERO:
        raise UndefinedDistributionError("cannot normalize an all-zero measure")
    return np.asarray(arr, dtype=float) - total


@dataclass(frozen=True)
class Schema:
    """Ordered discrete variables; the index of a variable is its identity."""

    names: tuple[str, ...]
    cards: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        object.__setattr__(self, "cards", tuple(int(c) for c in self.cards))
        if len(self.names) != len(self.cards):
            raise ValidationError("schema names and cardinalities differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("schema names are not unique")
        if any(c < 2 for c in self.cards):
            raise ValidationError("every variable needs cardinality >= 2")

    @classmethod
    def of_cards(cls, cards: Sequence[int]) -> "Schema":
        cards = tuple(int(c) for c in cards)
        return cls(tuple(f"v{i}" for i in range(len(cards))), cards)

    def __len__(self) -> int:
        return len(self.cards)

    def compatible(self, other: "Schema") -> bool:
        return self.cards == other.cards

    def require_compatible(self, other: "Schema", what: str = "input") -> None:
        if not self.compatible(other):
            raise SchemaMismatchError(
                f"{what} has cardinalities {other.cards}, expected {self.cards}"
            )

    def check_scope(self, scope: Sequence[int]) -> tuple[int, ...]:
        scope = tuple(int(v) for v in scope)
        if len(set(scope)) != len(scope):
            raise InvalidScopeError(f"duplicate variable in scope {scope}")
        for v in scope:
            if not 0 <= v < len(self):
                raise InvalidScopeError(f"variable {v} out of range for {len(self)} variables")
        return scope

    def check_assignment(self, values: Sequence[int], allow_unknown: bool = True) -> np.ndarray:
        arr = np.asarray(values, dtype=np.int64)
        if arr.shape != (len(self),):
            raise SchemaMismatchError(
                f"assignment has {arr.shape} entries, expected {len(self)}"
            )
        lo = UNKNOWN if allow_unknown else 0
        if np.any(arr < lo) or np.any(arr >= np.asarray(self.cards)):
            raise ValidationError(f"assignment {arr.tolist()} out of range for {self.cards}")
        return arr

    def states(self, scope: Sequence[int]) -> int:
        n = 1
        for v in scope:
            n *= self.cards[v]
        return n


def empty_evidence(schema: Schema) -> np.ndarray:
    """An assignment with every variable unknown."""
    return np.full(len(schema), UNKNOWN, dtype=np.int64)


@dataclass(frozen=True)
class Dataset:
    """Fully observed instances over a schema, with optional row weights."""

    schema: Schema
    rows: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != len(self.schema):
            rows = rows.reshape(-1, len(self.schema))
        if rows.size and (rows.min() < 0 or np.any(rows >= np.asarray(self.schema.cards))):
            raise ValidationError("dataset contains values outside the schema")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (rows.shape[0],):
                raise ValidationError("weights length does not match row count")
            if np.any(w < 0):
                raise ValidationError("row weights must be nonnegative")
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def weight_vector(self) -> np.ndarray:
        if self.weights is not None:
            return self.weights
        return np.ones(self.n_rows)

    @property
    def total_weight(self) -> float:
        return float(self.weight_vector().sum())

    def reweighted(self, weights: Sequence[float]) -> "Dataset":
        return Dataset(self.schema, self.rows, np.asarray(weights, dtype=float))


@dataclass(frozen=True)
class ContingencyTable:
    """Dense joint counts over a scope, row-major with last variable fastest."""

    scope: tuple[int, ...]
    cards: tuple[int, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        expected = 1
        for c in self.cards:
            expected *= c
        if counts.shape != (expected,):
            raise ValidationError(
                f"count table has {counts.shape} entries, expected {expected}"
            )
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def reshaped(self) -> np.ndarray:
        return self.counts.reshape(self.cards or (1,))


def count_marginal(dataset: Dataset, scope: Sequence[int]) -> ContingencyTable:
    """Weighted joint counts of the dataset over the given scope.

    The empty scope yields a single cell holding the total row weight.
    """
    scope = dataset.schema.check_scope(scope)
    w = dataset.weight_vector()
    if not scope:
        return ContingencyTable((), (), np.array([w.sum()]))
    cards = tuple(dataset.schema.cards[v] for v in scope)
    size = int(np.prod(cards))
    if dataset.n_rows == 0:
        return ContingencyTable(scope, cards, np.zeros(size))
    idx = np.ravel_multi_index(tuple(dataset.rows[:, v] for v in scope), cards)
    counts = np.bincount(idx, weights=w, minlength=size)
    return ContingencyTable(scope, cards, counts)


def mutual_information(dataset: Dataset, x: int, y: int, alpha: float = 1.0) -> float:
    """Empirical mutual information of two variables under add-alpha smoothing.

    alpha is added to every joint cell; the marginals are computed from the
    smoothed joint, which keeps the result nonnegative and exactly symmetric
    in x and y.
    """
    if x == y:
        raise InvalidScopeError("mutual information needs two distinct variables")
    a, b = (x, y) if x < y else (y, x)
    table = count_marginal(dataset, (a, b))
    joint = table.reshaped() + float(alpha)
    total = joint.sum()
    if total <= 0:
        raise UndefinedDistributionError(
            "no mass to normalize: empty data with zero smoothing"
        )
    p = joint / total
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    mask = p > 0
    terms = p[mask] * (np.log(p[mask]) - np.log((px * py)[mask]))
    return max(0.0, float(terms.sum()))
