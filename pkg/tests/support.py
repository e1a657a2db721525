"""Shared test helpers: enumeration oracles and random model generators.

The oracles deliberately avoid the library's inference and compilation
paths: they walk every joint state and score it with factor_log_value,
which is the definitional semantics of a factor.
"""

import itertools
import math

import numpy as np

from pgmkit.core import Dataset, Schema
from pgmkit.factors import (
    Literal,
    Split,
    TableFactor,
    conjunctive_feature,
    dist_leaf,
    factor_log_value,
    tree_factor,
    weight_leaf,
)
from pgmkit.models import BayesNet, DependencyNet, MarkovNet, cpd_distribution


def all_states(cards):
    return itertools.product(*(range(c) for c in cards))


def model_factors(model):
    if isinstance(model, (BayesNet, DependencyNet)):
        return model.cpds
    return model.potentials


def joint_log_table(model) -> np.ndarray:
    """Per-state log measure by brute force over every joint state."""
    cards = model.schema.cards
    out = np.empty(cards)
    for state in all_states(cards):
        out[state] = sum(factor_log_value(f, state) for f in model_factors(model))
    return out


def enum_log_measure(model, evidence) -> float:
    """Log of the summed measure over all completions of the evidence."""
    joint = joint_log_table(model)
    total = -math.inf
    for state in all_states(model.schema.cards):
        if any(e >= 0 and s != e for s, e in zip(state, evidence)):
            continue
        v = joint[state]
        if v == -math.inf:
            continue
        total = v if total == -math.inf else max(total, v) + math.log1p(
            math.exp(min(total, v) - max(total, v))
        )
    return total


def enum_conditional_marginals(model, evidence):
    """Exact per-variable conditionals given evidence, by enumeration."""
    cards = model.schema.cards
    joint = joint_log_table(model)
    mask = np.ones(cards, dtype=bool)
    for v, e in enumerate(evidence):
        if e >= 0:
            index = [slice(None)] * len(cards)
            keep = np.zeros(cards[v], dtype=bool)
            keep[e] = True
            index[v] = ~keep
            mask[tuple(index)] = False
    flat = np.where(mask, joint, -np.inf)
    m = flat.max()
    p = np.exp(flat - m)
    z = p.sum()
    assert z > 0, "evidence has zero mass"
    p /= z
    out = []
    for v in range(len(cards)):
        axes = tuple(u for u in range(len(cards)) if u != v)
        out.append(p.sum(axis=axes))
    return out


def enum_map(model, evidence):
    """Exact MAP completion and its log measure, by enumeration."""
    joint = joint_log_table(model)
    best, best_v = None, -math.inf
    for state in all_states(model.schema.cards):
        if any(e >= 0 and s != e for s, e in zip(state, evidence)):
            continue
        if joint[state] > best_v:
            best, best_v = state, float(joint[state])
    return np.asarray(best), best_v


def dirichlet_rows(rng, shape, card):
    probs = rng.gamma(1.0, size=shape + (card,)) + 1e-3
    return probs / probs.sum(axis=-1, keepdims=True)


def random_table_cpd(rng, schema, v, parents):
    scope = tuple(sorted(set(parents) | {v}))
    cards = tuple(schema.cards[u] for u in scope)
    axis = scope.index(v)
    shape = tuple(c for i, c in enumerate(cards) if i != axis)
    probs = dirichlet_rows(rng, shape, schema.cards[v])
    arr = np.moveaxis(probs, -1, axis)
    return TableFactor(scope, cards, np.log(arr.ravel()))


def random_tree_cpd(rng, schema, v, parents):
    parents = list(parents)

    def build(remaining):
        if not remaining or rng.random() < 0.35:
            return dist_leaf(np.log(dirichlet_rows(rng, (), schema.cards[v])))
        u = remaining[0]
        return Split(
            u, tuple(build(remaining[1:]) for _ in range(schema.cards[u]))
        )

    return tree_factor(build(parents), schema, target=v)


def random_bn(rng, cards, max_parents=2, tree_prob=0.5) -> BayesNet:
    schema = Schema.of_cards(cards)
    cpds = []
    for v in range(len(cards)):
        k = int(rng.integers(0, min(max_parents, v) + 1))
        parents = sorted(rng.choice(v, size=k, replace=False).tolist()) if k else []
        if parents and rng.random() < tree_prob:
            cpds.append(random_tree_cpd(rng, schema, v, parents))
        else:
            cpds.append(random_table_cpd(rng, schema, v, parents))
    return BayesNet(schema, tuple(cpds))


def random_weight_tree(rng, schema, scope):
    def build(remaining):
        if not remaining or rng.random() < 0.3:
            return weight_leaf(float(rng.normal(0, 0.8)))
        u = remaining[0]
        return Split(
            u, tuple(build(remaining[1:]) for _ in range(schema.cards[u]))
        )

    root = build(list(scope))
    return tree_factor(root, schema)


def random_feature(rng, schema, scope):
    lits = [
        Literal(v, int(rng.integers(schema.cards[v])), bool(rng.random() < 0.4))
        for v in scope
    ]
    return conjunctive_feature(lits, float(rng.normal(0, 1.0)), schema)


def random_potential(rng, schema, scope):
    kind = rng.integers(3)
    if kind == 0:
        cards = tuple(schema.cards[v] for v in scope)
        size = int(np.prod(cards))
        return TableFactor(tuple(scope), cards, rng.normal(0, 0.8, size=size))
    if kind == 1 and scope:
        t = random_weight_tree(rng, schema, scope)
        if t.scope:
            return t
    return random_feature(rng, schema, scope)


def random_mn(rng, cards, n_potentials=5, max_scope=3) -> MarkovNet:
    schema = Schema.of_cards(cards)
    potentials = []
    for _ in range(n_potentials):
        k = int(rng.integers(1, min(max_scope, len(cards)) + 1))
        scope = sorted(rng.choice(len(cards), size=k, replace=False).tolist())
        potentials.append(random_potential(rng, schema, scope))
    return MarkovNet(schema, tuple(potentials))


def random_dataset(rng, schema, n) -> Dataset:
    rows = np.stack(
        [rng.integers(0, c, size=n) for c in schema.cards], axis=1
    )
    return Dataset(schema, rows)


def sample_bn(rng, bn: BayesNet, n: int) -> Dataset:
    rows = np.zeros((n, len(bn.schema)), dtype=np.int64)
    for i in range(n):
        for v in range(len(bn.schema)):
            probs = cpd_distribution(bn.cpds[v], v, rows[i])
            rows[i, v] = rng.choice(len(probs), p=probs / probs.sum())
    return Dataset(bn.schema, rows)


def bounded_cards(rng, n_vars, max_states=6561):
    """Random mix of binary/ternary cardinalities with a bounded state space."""
    while True:
        cards = [int(rng.choice([2, 2, 3]))] + [
            int(rng.choice([2, 2, 3])) for _ in range(n_vars - 1)
        ]
        if np.prod(cards) <= max_states:
            return cards
