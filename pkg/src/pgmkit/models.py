"""Composite model types and their shared scoring operations.

Four model classes live here.  A BayesNet owns one conditional per
variable (table or targeted tree) whose scope implies the parent set; the
parent graph must be acyclic and every conditional must normalize.  A
MarkovNet is an unnormalized bag of potentials.  A DependencyNet holds one
conditional per variable with no acyclicity or consistency requirement;
all of its semantics are operational, through the conditionals.  A
MixtureOfTrees is a convex combination of tree-structured BayesNets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import (
    LOG_ZERO,
    Dataset,
    Schema,
    log_sum_exp,
)
from .errors import UndefinedDistributionError, ValidationError
from .factors import (
    ConjunctiveFeature,
    Factor,
    Leaf,
    Split,
    TableFactor,
    TreeFactor,
    factor_log_value,
)

Cpd = Union[TableFactor, TreeFactor]

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class BayesNet:
    schema: Schema
    cpds: tuple[Cpd, ...]

    def parents(self, v: int) -> tuple[int, ...]:
        return tuple(u for u in self.cpds[v].scope if u != v)


@dataclass(frozen=True)
class MarkovNet:
    schema: Schema
    potentials: tuple[Factor, ...]


@dataclass(frozen=True)
class DependencyNet:
    schema: Schema
    cpds: tuple[Cpd, ...]


@dataclass(frozen=True)
class MixtureOfTrees:
    schema: Schema
    log_mix_weights: np.ndarray
    components: tuple[BayesNet, ...]

    def __post_init__(self):
        w = np.asarray(self.log_mix_weights, dtype=float)
        w.flags.writeable = False
        object.__setattr__(self, "log_mix_weights", w)


Model = Union[BayesNet, MarkovNet, DependencyNet, MixtureOfTrees]


def bn_row_log_prob(bn: BayesNet, row) -> float:
    return sum(factor_log_value(cpd, row) for cpd in bn.cpds)


def mt_row_log_prob(mt: MixtureOfTrees, row) -> float:
    scores = [
        w + bn_row_log_prob(comp, row)
        for w, comp in zip(mt.log_mix_weights, mt.components)
    ]
    return float(log_sum_exp(np.asarray(scores)))


def log_likelihood(model: Union[BayesNet, MixtureOfTrees], dataset: Dataset) -> float:
    """Weighted sum over rows of the model's log probability."""
    model.schema.require_compatible(dataset.schema, "dataset")
    per_row = bn_row_log_prob if isinstance(model, BayesNet) else mt_row_log_prob
    w = dataset.weight_vector()
    return float(sum(w[i] * per_row(model, dataset.rows[i]) for i in range(dataset.n_rows)))


def cpd_distribution(cpd: Cpd, v: int, state) -> np.ndarray:
    """Normalized conditional over v read off its CPD at the given state."""
    if isinstance(cpd, TreeFactor):
        node = cpd.root
        while isinstance(node, Split):
            node = node.children[int(state[node.var])]
        probs = np.exp(node.values)
    else:
        card = cpd.cards[cpd.scope.index(v)]
        buf = np.array(state, dtype=np.int64)
        logs = np.empty(card)
        for x in range(card):
            buf[v] = x
            logs[x] = factor_log_value(cpd, buf)
        probs = np.exp(logs - logs.max()) if np.isfinite(logs.max()) else np.zeros(card)
    total = probs.sum()
    if total <= 0:
        raise UndefinedDistributionError(f"conditional of variable {v} has no mass")
    return probs / total


def factors_touching(model: Union[BayesNet, MarkovNet], v: int) -> list[Factor]:
    if isinstance(model, BayesNet):
        return [cpd for cpd in model.cpds if v in cpd.scope]
    return [f for f in model.potentials if v in f.scope]


def markov_blanket_conditional(model: Model, v: int, state) -> np.ndarray:
    """Distribution of v given all other variables at the given state.

    For a dependency network this reads the stored conditional directly;
    otherwise it renormalizes the product of factors whose scope contains v.
    """
    if isinstance(model, DependencyNet):
        return cpd_distribution(model.cpds[v], v, state)
    card = model.schema.cards[v]
    facs = factors_touching(model, v)
    buf = np.array(state, dtype=np.int64)
    scores = np.zeros(card)
    for x in range(card):
        buf[v] = x
        scores[x] = sum(factor_log_value(f, buf) for f in facs)
    m = scores.max()
    if m == LOG_ZERO:
        raise UndefinedDistributionError(f"conditional of variable {v} has no mass")
    probs = np.exp(scores - m)
    return probs / probs.sum()


def pseudo_log_likelihood(model: Union[MarkovNet, DependencyNet], dataset: Dataset) -> float:
    """Weighted sum over rows and variables of log P(x_v | x_-v)."""
    model.schema.require_compatible(dataset.schema, "dataset")
    n = len(model.schema)
    w = dataset.weight_vector()
    total = 0.0
    for i in range(dataset.n_rows):
        row = dataset.rows[i]
        for v in range(n):
            probs = markov_blanket_conditional(model, v, row)
            p = probs[row[v]]
            total += w[i] * (np.log(p) if p > 0 else LOG_ZERO)
    return float(total)


def state_log_measure(model: Model, state) -> float:
    """Unnormalized log measure of a fully-known state.

    Bayes nets and mixtures report the log joint, Markov nets the sum of
    potential values, dependency nets the sum of conditional log
    probabilities (an operational score; no joint need exist).
    """
    if isinstance(model, BayesNet):
        return bn_row_log_prob(model, state)
    if isinstance(model, MixtureOfTrees):
        return mt_row_log_prob(model, state)
    if isinstance(model, MarkovNet):
        return float(sum(factor_log_value(f, state) for f in model.potentials))
    total = 0.0
    for v in range(len(model.schema)):
        p = cpd_distribution(model.cpds[v], v, state)[int(state[v])]
        total += float(np.log(p)) if p > 0 else LOG_ZERO
    return total


def bn_to_mn(bn: BayesNet) -> MarkovNet:
    """View a Bayes net as a Markov net with one potential per conditional.

    Structured conditionals are kept as-is, so the converted network scores
    every state identically to the Bayes net and has partition function 1.
    """
    return MarkovNet(bn.schema, tuple(bn.cpds))


def _toposort(parents: list[tuple[int, ...]]) -> list[int] | None:
    n = len(parents)
    children: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for v, ps in enumerate(parents):
        indeg[v] = len(ps)
        for p in ps:
            children[p].append(v)
    ready = sorted(v for v in range(n) if indeg[v] == 0)
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
        ready.sort()
    return order if len(order) == n else None


def _leaves(node) -> list[Leaf]:
    if isinstance(node, Leaf):
        return [node]
    out = []
    for child in node.children:
        out.extend(_leaves(child))
    return out


def _tree_splits(node) -> set[int]:
    acc: set[int] = set()

    def rec(nd):
        if isinstance(nd, Split):
            acc.add(nd.var)
            for c in nd.children:
                rec(c)

    rec(node)
    return acc


def _check_cpd(schema: Schema, v: int, cpd: Cpd, out: list[str], label: str) -> None:
    card = schema.cards[v]
    if isinstance(cpd, TreeFactor):
        if cpd.target != v:
            out.append(f"{label} {v}: tree target is {cpd.target}, expected {v}")
            return
        if v in _tree_splits(cpd.root):
            out.append(f"{label} {v}: tree splits on its own target")
            return
        for lf in _leaves(cpd.root):
            if not lf.is_distribution or lf.values.shape != (card,):
                out.append(f"{label} {v}: leaf does not hold {card} probabilities")
                return
            s = float(np.exp(lf.values).sum())
            if abs(s - 1.0) > _NORM_TOL:
                out.append(f"{label} {v}: leaf distribution sums to {s!r}")
    elif isinstance(cpd, TableFactor):
        if v not in cpd.scope:
            out.append(f"{label} {v}: table scope omits the target")
            return
        axis = cpd.scope.index(v)
        sums = np.exp(cpd.reshaped()).sum(axis=axis)
        if np.any(np.abs(sums - 1.0) > _NORM_TOL):
            out.append(f"{label} {v}: table rows do not normalize")
    else:
        out.append(f"{label} {v}: conditionals must be tables or trees")
    for u, c in zip(cpd.scope, cpd.cards):
        if u >= len(schema) or schema.cards[u] != c:
            out.append(f"{label} {v}: scope variable {u} disagrees with the schema")


def _check_factor_scope(schema: Schema, f: Factor, out: list[str], label: str) -> None:
    for u, c in zip(f.scope, f.cards):
        if u >= len(schema):
            out.append(f"{label}: variable {u} out of range")
        elif schema.cards[u] != c:
            out.append(f"{label}: cardinality of variable {u} disagrees with the schema")
    if isinstance(f, ConjunctiveFeature):
        for lit in f.literals:
            if lit.var < len(schema) and not 0 <= lit.value < schema.cards[lit.var]:
                out.append(f"{label}: literal value {lit.value} out of range")


def validate(model: Model) -> list[str]:
    """Every invariant violation in the model; an empty list means valid."""
    out: list[str] = []
    if isinstance(model, BayesNet):
        if len(model.cpds) != len(model.schema):
            return [f"expected {len(model.schema)} conditionals, found {len(model.cpds)}"]
        for v, cpd in enumerate(model.cpds):
            _check_cpd(model.schema, v, cpd, out, "conditional")
        parents = [tuple(u for u in cpd.scope if u != v) for v, cpd in enumerate(model.cpds)]
        if _toposort(parents) is None:
            out.append("parent graph contains a directed cycle")
    elif isinstance(model, DependencyNet):
        if len(model.cpds) != len(model.schema):
            return [f"expected {len(model.schema)} conditionals, found {len(model.cpds)}"]
        for v, cpd in enumerate(model.cpds):
            _check_cpd(model.schema, v, cpd, out, "conditional")
    elif isinstance(model, MarkovNet):
        for i, f in enumerate(model.potentials):
            _check_factor_scope(model.schema, f, out, f"potential {i}")
    elif isinstance(model, MixtureOfTrees):
        if len(model.components) != len(model.log_mix_weights):
            return ["one mixture weight is needed per component"]
        s = float(np.exp(model.log_mix_weights).sum())
        if abs(s - 1.0) > _NORM_TOL:
            out.append(f"mixture weights sum to {s!r}")
        for k, comp in enumerate(model.components):
            if not comp.schema.compatible(model.schema):
                out.append(f"component {k} disagrees with the mixture schema")
                continue
            out.extend(f"component {k}: {msg}" for msg in validate(comp))
            if any(len(comp.parents(v)) > 1 for v in range(len(comp.schema))):
                out.append(f"component {k} is not tree-structured")
    else:
        out.append(f"unknown model type {type(model).__name__}")
    return out


def topological_order(bn: BayesNet) -> list[int]:
    order = _toposort([bn.parents(v) for v in range(len(bn.schema))])
    if order is None:
        raise ValidationError("parent graph contains a directed cycle")
    return order
