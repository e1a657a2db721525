"""Potential functions: dense tables, decision trees, conjunctive features.

All three kinds score assignments in log space through one entry point,
factor_log_value.  Tables are row-major with the last scope variable
fastest; a tree may split on any variable at most once per root-to-leaf
path; a conjunctive feature contributes its log weight when every literal
is satisfied and log 1 = 0 otherwise, so features act as multiplicative
bumps on a log-linear model.

Tree leaves come in two flavors.  An untargeted tree (a Markov-network
potential) holds a scalar log weight per leaf.  A targeted tree (a
conditional distribution for its target variable) holds a log distribution
over the target's values per leaf, and never splits on the target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import UNKNOWN, Schema, log_sum_exp
from .errors import (
    IncompleteAssignmentError,
    InvalidScopeError,
    ValidationError,
)


@dataclass(frozen=True)
class TableFactor:
    scope: tuple[int, ...]
    cards: tuple[int, ...]
    log_values: np.ndarray

    def __post_init__(self):
        scope = tuple(int(v) for v in self.scope)
        cards = tuple(int(c) for c in self.cards)
        if any(a >= b for a, b in zip(scope, scope[1:])):
            raise InvalidScopeError(f"table scope {scope} must be strictly increasing")
        if len(scope) != len(cards):
            raise ValidationError("scope and cardinality lists differ in length")
        size = 1
        for c in cards:
            size *= c
        vals = np.asarray(self.log_values, dtype=float).reshape(size)
        vals.flags.writeable = False
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "cards", cards)
        object.__setattr__(self, "log_values", vals)

    @property
    def size(self) -> int:
        return self.log_values.shape[0]

    def reshaped(self) -> np.ndarray:
        return self.log_values.reshape(self.cards or (1,))


@dataclass(frozen=True)
class Leaf:
    """Tree leaf: scalar log weight, or a log distribution over the target."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def is_distribution(self) -> bool:
        return self.values.ndim == 1


@dataclass(frozen=True)
class Split:
    var: int
    children: tuple["TreeNode", ...]


TreeNode = Union[Leaf, Split]


def weight_leaf(log_weight: float) -> Leaf:
    return Leaf(np.asarray(float(log_weight)))


def dist_leaf(log_probs: Sequence[float]) -> Leaf:
    return Leaf(np.asarray(log_probs, dtype=float))


@dataclass(frozen=True)
class TreeFactor:
    root: TreeNode
    target: int | None
    scope: tuple[int, ...]
    cards: tuple[int, ...]


def _tree_split_vars(node: TreeNode, acc: set[int]) -> None:
    if isinstance(node, Split):
        acc.add(node.var)
        for child in node.children:
            _tree_split_vars(child, acc)


def _check_tree(node: TreeNode, card_of, target, path: set[int]) -> None:
    if isinstance(node, Leaf):
        if target is None:
            if node.values.ndim != 0:
                raise ValidationError("untargeted tree leaves must hold a scalar weight")
        else:
            if node.values.shape != (card_of(target),):
                raise ValidationError(
                    "targeted tree leaves must hold one log probability per target value"
                )
        return
    if node.var in path:
        raise ValidationError(f"variable {node.var} split twice on one path")
    if target is not None and node.var == target:
        raise ValidationError("a conditional tree may not split on its own target")
    if len(node.children) != card_of(node.var):
        raise ValidationError(
            f"split on variable {node.var} needs {card_of(node.var)} children"
        )
    for child in node.children:
        _check_tree(child, card_of, target, path | {node.var})


def tree_factor(root: TreeNode, schema: Schema, target: int | None = None) -> TreeFactor:
    """Validated tree factor; scope and cardinalities derive from the tree."""
    _check_tree(root, lambda v: schema.cards[v], target, set())
    used: set[int] = set()
    _tree_split_vars(root, used)
    if target is not None:
        used.add(int(target))
    scope = tuple(sorted(used))
    cards = tuple(schema.cards[v] for v in scope)
    return TreeFactor(root, target, scope, cards)


@dataclass(frozen=True)
class Literal:
    var: int
    value: int
    negated: bool = False

    def satisfied_by(self, x: int) -> bool:
        return (x != self.value) if self.negated else (x == self.value)


@dataclass(frozen=True)
class ConjunctiveFeature:
    literals: tuple[Literal, ...]
    log_weight: float
    cards: tuple[int, ...]

    @property
    def scope(self) -> tuple[int, ...]:
        return tuple(lit.var for lit in self.literals)


def conjunctive_feature(
    literals: Sequence[Literal], log_weight: float, schema: Schema
) -> ConjunctiveFeature:
    lits = tuple(sorted(literals, key=lambda l: l.var))
    seen: set[int] = set()
    for lit in lits:
        if lit.var in seen:
            raise ValidationError(f"feature has two literals on variable {lit.var}")
        seen.add(lit.var)
        if not 0 <= lit.var < len(schema):
            raise InvalidScopeError(f"literal variable {lit.var} out of range")
        if not 0 <= lit.value < schema.cards[lit.var]:
            raise ValidationError(f"literal value {lit.value} out of range")
    cards = tuple(schema.cards[lit.var] for lit in lits)
    return ConjunctiveFeature(lits, float(log_weight), cards)


Factor = Union[TableFactor, TreeFactor, ConjunctiveFeature]


def _known(assignment, v: int) -> int:
    x = int(assignment[v])
    if x == UNKNOWN:
        raise IncompleteAssignmentError(f"variable {v} is unknown but in scope")
    return x


def factor_log_value(factor: Factor, assignment) -> float:
    """Log value of a factor at a fully-known assignment over its scope."""
    if isinstance(factor, TableFactor):
        idx = 0
        for v, c in zip(factor.scope, factor.cards):
            idx = idx * c + _known(assignment, v)
        return float(factor.log_values[idx])
    if isinstance(factor, TreeFactor):
        node = factor.root
        while isinstance(node, Split):
            node = node.children[_known(assignment, node.var)]
        if factor.target is None:
            return float(node.values)
        return float(node.values[_known(assignment, factor.target)])
    if isinstance(factor, ConjunctiveFeature):
        for lit in factor.literals:
            if not lit.satisfied_by(_known(assignment, lit.var)):
                return 0.0
        return factor.log_weight
    raise TypeError(f"not a factor: {type(factor).__name__}")


def _enumerate_scope(scope, cards):
    """Yield assignments (buffers indexed by variable id) over a scope."""
    buf = np.full((max(scope) + 1) if scope else 1, UNKNOWN, dtype=np.int64)
    for config in np.ndindex(*cards):
        for v, x in zip(scope, config):
            buf[v] = x
        yield buf


def table_from_tree(factor: TreeFactor) -> TableFactor:
    vals = np.empty(int(np.prod(factor.cards)) if factor.cards else 1)
    for i, buf in enumerate(_enumerate_scope(factor.scope, factor.cards)):
        vals[i] = factor_log_value(factor, buf)
    return TableFactor(factor.scope, factor.cards, vals)


def table_from_feature(factor: ConjunctiveFeature) -> TableFactor:
    vals = np.empty(int(np.prod(factor.cards)) if factor.cards else 1)
    for i, buf in enumerate(_enumerate_scope(factor.scope, factor.cards)):
        vals[i] = factor_log_value(factor, buf)
    return TableFactor(factor.scope, factor.cards, vals)


def as_table(factor: Factor) -> TableFactor:
    """Dense view of any factor kind."""
    if isinstance(factor, TableFactor):
        return factor
    if isinstance(factor, TreeFactor):
        return table_from_tree(factor)
    return table_from_feature(factor)


def _broadcast_shape(scope, cards, union_scope, union_cards):
    return tuple(
        union_cards[i] if union_scope[i] in scope else 1 for i in range(len(union_scope))
    )


def multiply(a: TableFactor, b: TableFactor) -> TableFactor:
    """Pointwise log-space product; the result scope is the sorted union."""
    card_of = dict(zip(a.scope, a.cards))
    for v, c in zip(b.scope, b.cards):
        if card_of.setdefault(v, c) != c:
            raise ValidationError(f"factors disagree on cardinality of variable {v}")
    scope = tuple(sorted(card_of))
    cards = tuple(card_of[v] for v in scope)
    arr_a = a.log_values.reshape(_broadcast_shape(a.scope, a.cards, scope, cards))
    arr_b = b.log_values.reshape(_broadcast_shape(b.scope, b.cards, scope, cards))
    return TableFactor(scope, cards, (arr_a + arr_b).ravel())


def marginalize(factor: TableFactor, v: int, mode: str = "sum") -> TableFactor:
    """Remove a variable from a table by log-sum-exp or max over its values."""
    if v not in factor.scope:
        raise InvalidScopeError(f"variable {v} not in scope {factor.scope}")
    axis = factor.scope.index(v)
    arr = factor.reshaped()
    if mode == "sum":
        out = log_sum_exp(arr, axis=axis)
    elif mode == "max":
        out = arr.max(axis=axis)
    else:
        raise InvalidScopeError(f"unknown marginalization mode {mode!r}")
    scope = tuple(u for u in factor.scope if u != v)
    cards = tuple(c for u, c in zip(factor.scope, factor.cards) if u != v)
    return TableFactor(scope, cards, np.asarray(out).ravel())


def _prune_tree(node: TreeNode, evidence, target_value: int | None) -> TreeNode:
    if isinstance(node, Leaf):
        if target_value is None:
            return node
        return weight_leaf(float(node.values[target_value]))
    x = int(evidence[node.var])
    if x == UNKNOWN:
        return Split(node.var, tuple(_prune_tree(c, evidence, target_value) for c in node.children))
    return _prune_tree(node.children[x], evidence, target_value)


def condition(factor: Factor, evidence) -> Factor:
    """Restrict a factor to evidence; structured kinds stay structured.

    Trees drop contradicted branches, features drop satisfied literals or
    collapse to a log-weight of zero when contradicted, and tables slice
    the observed variables out of their scope.
    """
    if isinstance(factor, TableFactor):
        fixed_map = {
            i: int(evidence[v])
            for i, v in enumerate(factor.scope)
            if int(evidence[v]) != UNKNOWN
        }
        if not fixed_map:
            return factor
        index = tuple(fixed_map.get(i, slice(None)) for i in range(len(factor.scope)))
        sub = factor.reshaped()[index]
        scope = tuple(v for i, v in enumerate(factor.scope) if i not in fixed_map)
        cards = tuple(c for i, c in enumerate(factor.cards) if i not in fixed_map)
        return TableFactor(scope, cards, np.asarray(sub).ravel())
    if isinstance(factor, TreeFactor):
        target = factor.target
        target_value = None
        if target is not None and int(evidence[target]) != UNKNOWN:
            target_value = int(evidence[target])
            target = None
        root = _prune_tree(factor.root, evidence, target_value)
        used: set[int] = set()
        _tree_split_vars(root, used)
        if target is not None:
            used.add(target)
        card_of = dict(zip(factor.scope, factor.cards))
        scope = tuple(sorted(used))
        return TreeFactor(root, target, scope, tuple(card_of[v] for v in scope))
    if isinstance(factor, ConjunctiveFeature):
        kept = []
        for lit in factor.literals:
            x = int(evidence[lit.var])
            if x == UNKNOWN:
                kept.append(lit)
            elif not lit.satisfied_by(x):
                return ConjunctiveFeature((), 0.0, ())
        if len(kept) == len(factor.literals):
            return factor
        card_of = dict(zip(factor.scope, factor.cards))
        return ConjunctiveFeature(
            tuple(kept), factor.log_weight, tuple(card_of[l.var] for l in kept)
        )
    raise TypeError(f"not a factor: {type(factor).__name__}")


def factor_scope(factor: Factor) -> tuple[int, ...]:
    return factor.scope


def factor_cards(factor: Factor) -> tuple[int, ...]:
    return factor.cards
