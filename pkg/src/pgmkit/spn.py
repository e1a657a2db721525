"""Sum-product networks: validity, inference, conversion, and learning.

A valid network is complete (all children of a weighted sum share one
scope) and decomposable (children of a product have pairwise disjoint
scopes), with each sum's weights normalized.  Those two conditions make
every marginal query a single upward pass.

The structure learner is a deliberately simple recursive builder: it
splits independent variable groups into products (pairwise mutual
information below a threshold, then connected components), clusters rows
into weighted sums (seeded k-modes on Hamming distance), and bottoms out
in smoothed univariate categorical leaves.  It is NOT the full ID-SPN
procedure: there is no sublearner for multivariate leaves, so expect
coarser models than the research-grade algorithm would produce.  The CLI
help repeats this warning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .circuit import ArithmeticCircuit, CircuitBuilder, MpeResult
from .core import (
    LOG_ZERO,
    Dataset,
    Schema,
    empty_evidence,
    log_add,
    mutual_information,
)
from .diagnostics import seeded_rng
from .errors import OptionError, ZeroProbabilityEvidenceError


@dataclass(frozen=True)
class IndicatorLeaf:
    var: int
    val: int


@dataclass(frozen=True)
class SpnProduct:
    children: tuple[int, ...]


@dataclass(frozen=True)
class WeightedSum:
    children: tuple[int, ...]
    log_weights: tuple[float, ...]


SpnNode = Union[IndicatorLeaf, SpnProduct, WeightedSum]


@dataclass(frozen=True)
class SumProductNetwork:
    schema: Schema
    nodes: tuple[SpnNode, ...]

    @property
    def root(self) -> int:
        return len(self.nodes) - 1

    def scopes(self) -> list[frozenset[int]]:
        out: list[frozenset[int]] = []
        for nd in self.nodes:
            if isinstance(nd, IndicatorLeaf):
                out.append(frozenset((nd.var,)))
            else:
                s: set[int] = set()
                for c in nd.children:
                    s |= out[c]
                out.append(frozenset(s))
        return out

    def sum_edge_count(self) -> int:
        return sum(
            len(nd.children) for nd in self.nodes if isinstance(nd, WeightedSum)
        )


class SpnBuilder:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.nodes: list[SpnNode] = []
        self._memo: dict = {}

    def _add(self, key, node: SpnNode) -> int:
        if key in self._memo:
            return self._memo[key]
        idx = len(self.nodes)
        self.nodes.append(node)
        self._memo[key] = idx
        return idx

    def leaf(self, var: int, val: int) -> int:
        return self._add(("i", var, val), IndicatorLeaf(var, val))

    def product(self, children: Sequence[int]) -> int:
        tup = tuple(sorted(children))
        if len(tup) == 1:
            return tup[0]
        return self._add(("p", tup), SpnProduct(tup))

    def weighted_sum(self, children: Sequence[int], log_weights: Sequence[float]) -> int:
        tup = tuple(int(c) for c in children)
        w = tuple(float(x) for x in log_weights)
        return self._add(("s", tup, w), WeightedSum(tup, w))

    def finish(self, root: int) -> SumProductNetwork:
        live = np.zeros(len(self.nodes), dtype=bool)
        stack = [root]
        live[root] = True
        while stack:
            nd = self.nodes[stack.pop()]
            if isinstance(nd, (SpnProduct, WeightedSum)):
                for c in nd.children:
                    if not live[c]:
                        live[c] = True
                        stack.append(c)
        remap = np.cumsum(live) - 1
        nodes: list[SpnNode] = []
        for i, nd in enumerate(self.nodes):
            if not live[i]:
                continue
            if isinstance(nd, SpnProduct):
                nd = SpnProduct(tuple(int(remap[c]) for c in nd.children))
            elif isinstance(nd, WeightedSum):
                nd = WeightedSum(
                    tuple(int(remap[c]) for c in nd.children), nd.log_weights
                )
            nodes.append(nd)
        return SumProductNetwork(self.schema, tuple(nodes))


def validate_spn(spn: SumProductNetwork) -> list[str]:
    """All completeness, decomposability, weight, and coverage violations."""
    out: list[str] = []
    n = len(spn.nodes)
    for i, nd in enumerate(spn.nodes):
        if isinstance(nd, (SpnProduct, WeightedSum)):
            if not nd.children:
                out.append(f"node {i}: no children")
            for c in nd.children:
                if not 0 <= c < i:
                    out.append(f"node {i}: child {c} does not precede it")
                    return out
        if isinstance(nd, WeightedSum) and len(nd.children) != len(nd.log_weights):
            out.append(f"node {i}: {len(nd.log_weights)} weights for {len(nd.children)} children")
            return out
    scopes = spn.scopes()
    for i, nd in enumerate(spn.nodes):
        if isinstance(nd, WeightedSum):
            first = scopes[nd.children[0]]
            if any(scopes[c] != first for c in nd.children[1:]):
                out.append(f"node {i}: sum children have differing scopes")
            total = math.fsum(math.exp(w) for w in nd.log_weights)
            if abs(total - 1.0) > 1e-9:
                out.append(f"node {i}: sum weights total {total!r}")
        elif isinstance(nd, SpnProduct):
            union: set[int] = set()
            size = 0
            for c in nd.children:
                union |= scopes[c]
                size += len(scopes[c])
            if size != len(union):
                out.append(f"node {i}: product children share variables")
    covered = {
        (nd.var, nd.val) for nd in spn.nodes if isinstance(nd, IndicatorLeaf)
    }
    for v, card in enumerate(spn.schema.cards):
        for x in range(card):
            if (v, x) not in covered:
                out.append(f"value {x} of variable {v} is unreachable")
    if n and scopes[-1] != frozenset(range(len(spn.schema))):
        out.append("root scope does not cover every variable")
    return out


def _spn_upward(spn: SumProductNetwork, ev: np.ndarray, maximize: bool) -> list[float]:
    vals = [0.0] * len(spn.nodes)
    for i, nd in enumerate(spn.nodes):
        t = type(nd)
        if t is IndicatorLeaf:
            known = ev[nd.var]
            vals[i] = 0.0 if known < 0 or known == nd.val else LOG_ZERO
        elif t is SpnProduct:
            s = 0.0
            for c in nd.children:
                v = vals[c]
                if v == LOG_ZERO:
                    s = LOG_ZERO
                    break
                s += v
            vals[i] = s
        else:
            terms = [w + vals[c] for c, w in zip(nd.children, nd.log_weights)]
            m = max(terms)
            if maximize or m == LOG_ZERO:
                vals[i] = m
            else:
                vals[i] = m + math.log(sum(math.exp(x - m) for x in terms))
    return vals


def spn_log_prob(spn: SumProductNetwork, evidence=None) -> float:
    """Log probability of evidence; marginalized indicators read log 1."""
    ev = _ev(spn.schema, evidence)
    return _spn_upward(spn, ev, maximize=False)[-1]


def _ev(schema: Schema, evidence) -> np.ndarray:
    if evidence is None:
        return empty_evidence(schema)
    return schema.check_assignment(evidence, allow_unknown=True)


def spn_marginals(spn: SumProductNetwork, evidence=None) -> list[np.ndarray]:
    """Conditional marginals by differentiation, as in the circuit module."""
    ev = _ev(spn.schema, evidence)
    vals = _spn_upward(spn, ev, maximize=False)
    if vals[-1] == LOG_ZERO:
        raise ZeroProbabilityEvidenceError("evidence has probability zero")
    derivs = [LOG_ZERO] * len(spn.nodes)
    derivs[-1] = 0.0
    for i in range(len(spn.nodes) - 1, -1, -1):
        nd = spn.nodes[i]
        d = derivs[i]
        if d == LOG_ZERO:
            continue
        if isinstance(nd, WeightedSum):
            for c, w in zip(nd.children, nd.log_weights):
                derivs[c] = log_add(derivs[c], d + w)
        elif isinstance(nd, SpnProduct):
            finite_sum = 0.0
            zero_count = 0
            for c in nd.children:
                if vals[c] == LOG_ZERO:
                    zero_count += 1
                    if zero_count > 1:
                        break
                else:
                    finite_sum += vals[c]
            if zero_count > 1:
                continue
            for c in nd.children:
                if zero_count == 0:
                    sib = finite_sum - vals[c]
                elif vals[c] == LOG_ZERO:
                    sib = finite_sum
                else:
                    continue
                derivs[c] = log_add(derivs[c], d + sib)
    leaf_scores: dict[tuple[int, int], float] = {}
    for i, nd in enumerate(spn.nodes):
        if isinstance(nd, IndicatorLeaf):
            key = (nd.var, nd.val)
            leaf_scores[key] = log_add(leaf_scores.get(key, LOG_ZERO), derivs[i])
    out: list[np.ndarray] = []
    for v, card in enumerate(spn.schema.cards):
        dist = np.zeros(card)
        if ev[v] >= 0:
            dist[ev[v]] = 1.0
        else:
            scores = np.array([leaf_scores.get((v, x), LOG_ZERO) for x in range(card)])
            m = scores.max()
            if m == LOG_ZERO:
                raise ZeroProbabilityEvidenceError(
                    f"variable {v} has no support under the evidence"
                )
            dist = np.exp(scores - m)
            dist /= dist.sum()
        out.append(dist)
    return out


def spn_map(spn: SumProductNetwork, evidence=None) -> MpeResult:
    """Max-sum decode; ties at a sum go to the lowest child node index.

    Exact when every sum is deterministic at the decoded state, which is
    certified by re-evaluating the decoded completion.
    """
    ev = _ev(spn.schema, evidence)
    vals = _spn_upward(spn, ev, maximize=True)
    if vals[-1] == LOG_ZERO:
        raise ZeroProbabilityEvidenceError("evidence has probability zero")
    assign = ev.copy()
    stack = [spn.root]
    seen: set[int] = set()
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        nd = spn.nodes[i]
        if isinstance(nd, IndicatorLeaf):
            if assign[nd.var] < 0:
                assign[nd.var] = nd.val
        elif isinstance(nd, SpnProduct):
            stack.extend(nd.children)
        else:
            best_c, best_v = None, None
            for c, w in zip(nd.children, nd.log_weights):
                score = w + vals[c]
                if best_v is None or score > best_v or (score == best_v and c < best_c):
                    best_c, best_v = c, score
            stack.append(best_c)
    assign[assign < 0] = 0
    score = vals[-1]
    exact = abs(score - spn_log_prob(spn, assign)) <= 1e-9
    return MpeResult(assign, float(score), exact)


def spn_query(spn: SumProductNetwork, evidence=None, mode: str = "logprob"):
    """Dispatch to logprob, marginals, or map."""
    if mode == "logprob":
        return spn_log_prob(spn, evidence)
    if mode == "marginals":
        return spn_marginals(spn, evidence)
    if mode == "map":
        return spn_map(spn, evidence)
    raise OptionError(f"unknown query mode {mode!r}")


def spn_to_ac(spn: SumProductNetwork) -> ArithmeticCircuit:
    """Equivalent arithmetic circuit; sum weights become constant factors."""
    b = CircuitBuilder(spn.schema)
    mapped: list[int] = []
    for nd in spn.nodes:
        if isinstance(nd, IndicatorLeaf):
            mapped.append(b.indicator(nd.var, nd.val))
        elif isinstance(nd, SpnProduct):
            mapped.append(b.product([mapped[c] for c in nd.children]))
        else:
            terms = [
                b.product((b.constant(w), mapped[c]))
                for c, w in zip(nd.children, nd.log_weights)
            ]
            mapped.append(b.sum_(terms))
    return b.finish(mapped[spn.root])


@dataclass(frozen=True)
class SpnLearnOptions:
    min_rows: int = 50
    independence_threshold: float = 0.01
    sum_clusters: int = 2
    alpha: float = 1.0
    seed: int = 0


def _kmodes(rows: np.ndarray, weights: np.ndarray, cols: list[int], k: int, rng) -> np.ndarray:
    """Seeded k-modes on Hamming distance; returns a cluster id per row."""
    n = rows.shape[0]
    sub = rows[:, cols]
    start = rng.choice(n, size=min(k, n), replace=False)
    modes = sub[np.sort(start)].copy()
    assign = None
    for _ in range(20):
        dist = (sub[:, None, :] != modes[None, :, :]).sum(axis=2)
        new_assign = dist.argmin(axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(modes.shape[0]):
            mask = assign == j
            if not mask.any():
                continue
            for ci in range(len(cols)):
                counts = np.bincount(sub[mask, ci], weights=weights[mask])
                modes[j, ci] = counts.argmax()
    return assign


def _components(variables: list[int], dataset_rows, weights, schema, threshold, alpha):
    """Connected components of the thresholded mutual-information graph."""
    sub = Dataset(schema, dataset_rows, weights)
    parent = {v: v for v in variables}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for i, a in enumerate(variables):
        for b_ in variables[i + 1 :]:
            if mutual_information(sub, a, b_, alpha) > threshold:
                ra, rb = find(a), find(b_)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for v in variables:
        groups.setdefault(find(v), []).append(v)
    return [groups[r] for r in sorted(groups)]


def learn_spn(dataset: Dataset, options: SpnLearnOptions = SpnLearnOptions()) -> SumProductNetwork:
    """Recursive LearnSPN-style structure learner (see the module warning).

    Deterministic given the seed.  The returned network always validates
    and never scores the training data below the fully factorized
    baseline, because the baseline is kept as a fallback root.
    """
    if dataset.n_rows == 0:
        raise OptionError("cannot learn a network from an empty dataset")
    schema = dataset.schema
    hub = seeded_rng(options.seed)
    b = SpnBuilder(schema)
    all_weights = dataset.weight_vector()

    def leaf(var: int, rows: np.ndarray, weights: np.ndarray) -> int:
        counts = np.bincount(rows[:, var], weights=weights, minlength=schema.cards[var])
        counts = counts + options.alpha
        if counts.sum() <= 0:
            counts = np.ones_like(counts)
        probs = counts / counts.sum()
        children = [b.leaf(var, x) for x in range(schema.cards[var])]
        with np.errstate(divide="ignore"):
            return b.weighted_sum(children, np.log(probs))

    def factorized(variables: list[int], rows, weights) -> int:
        return b.product([leaf(v, rows, weights) for v in variables])

    def build(variables: list[int], rows: np.ndarray, weights: np.ndarray, path: str) -> int:
        if len(variables) == 1:
            return leaf(variables[0], rows, weights)
        if rows.shape[0] < options.min_rows:
            return factorized(variables, rows, weights)
        groups = _components(
            variables, rows, weights, schema, options.independence_threshold, options.alpha
        )
        if len(groups) > 1:
            return b.product(
                [build(g, rows, weights, f"{path}.{i}") for i, g in enumerate(groups)]
            )
        rng = hub.stream("kmodes:" + path)
        assign = _kmodes(rows, weights, variables, options.sum_clusters, rng)
        ids = [j for j in range(options.sum_clusters) if np.any(assign == j)]
        if len(ids) < 2:
            return factorized(variables, rows, weights)
        masses = np.array([weights[assign == j].sum() for j in ids]) + options.alpha
        log_w = np.log(masses / masses.sum())
        children = [
            build(variables, rows[assign == j], weights[assign == j], f"{path}.c{j}")
            for j in ids
        ]
        return b.weighted_sum(children, log_w)

    variables = list(range(len(schema)))
    learned_root = build(variables, dataset.rows, all_weights, "r")
    baseline_root = factorized(variables, dataset.rows, all_weights)
    learned = b.finish(learned_root)
    baseline = b.finish(baseline_root)
    learned_ll = spn_dataset_log_likelihood(learned, dataset)
    baseline_ll = spn_dataset_log_likelihood(baseline, dataset)
    return learned if learned_ll >= baseline_ll - 1e-9 else baseline


def spn_dataset_log_likelihood(spn: SumProductNetwork, dataset: Dataset) -> float:
    spn.schema.require_compatible(dataset.schema, "dataset")
    w = dataset.weight_vector()
    return float(
        sum(w[i] * spn_log_prob(spn, dataset.rows[i]) for i in range(dataset.n_rows))
    )
