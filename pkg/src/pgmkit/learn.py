"""Structure and parameter learning.

Structure learners share one scoring rule: add-alpha smoothed training
log-likelihood penalized by kappa per free parameter.  The tree-CPD
learners run a global greedy search over single leaf splits with a lazy
best-first queue; Chow-Liu builds the maximum mutual-information spanning
tree; the mixture learner wraps weighted Chow-Liu in EM.  Parameter
learners (pseudo-likelihood weights for Markov nets, maximum likelihood
for circuit constants) use full-batch gradient ascent with a backtracking
line search, so every accepted step keeps the objective non-decreasing.

The tractable-model pipeline (learn, then compile, retrying with a
doubled penalty while the compiled circuit is over budget) trades the
original circuit-growth-aware scoring for simplicity; the penalty knob is
the only control over circuit size, and the CLI help says so.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .circuit import ArithmeticCircuit, Constant, acve_compile, differentiate
from .core import (
    LOG_ZERO,
    Dataset,
    count_marginal,
    empty_evidence,
    mutual_information,
)
from .diagnostics import AuditTrace, seeded_rng
from .errors import NumericError, OptionError, TractabilityError
from .factors import (
    ConjunctiveFeature,
    Factor,
    Leaf,
    Split,
    TableFactor,
    TreeFactor,
    dist_leaf,
    tree_factor,
    weight_leaf,
)
from .models import (
    BayesNet,
    DependencyNet,
    MarkovNet,
    MixtureOfTrees,
    bn_row_log_prob,
    log_likelihood,
    markov_blanket_conditional,
)


@dataclass(frozen=True)
class LearnOptions:
    alpha: float = 1.0
    kappa: float = 1.0
    k: int = 2
    em_iters: int = 30
    em_threshold: float = 1e-4
    seed: int = 0
    max_parents: int | None = None
    max_leaves: int | None = None
    circuit_cap: int = 100000

    def __post_init__(self):
        if self.alpha < 0 or self.kappa < 0:
            raise OptionError("alpha and kappa must be nonnegative")


@dataclass(frozen=True)
class OptimOptions:
    l2: float = 0.0
    step: float = 1.0
    max_iters: int = 200
    tol: float = 1e-6

    def __post_init__(self):
        if self.l2 < 0 or self.step <= 0 or self.max_iters < 1 or self.tol <= 0:
            raise OptionError("invalid optimizer options")


def _smoothed_dist(counts: np.ndarray, alpha: float) -> np.ndarray:
    counts = np.asarray(counts, dtype=float) + alpha
    total = counts.sum()
    if total <= 0:
        return np.full(len(counts), 1.0 / len(counts))
    return counts / total


def _log_dist(probs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(probs)


# ---------------------------------------------------------------------------
# Chow-Liu and mixtures of trees
# ---------------------------------------------------------------------------


def chow_liu(dataset: Dataset, opts: LearnOptions = LearnOptions()) -> BayesNet:
    """Maximum-weight spanning tree under pairwise mutual information.

    Ties break lexicographically on the edge index, the tree is rooted at
    variable 0, and conditionals are add-alpha smoothed counts.
    """
    schema = dataset.schema
    n = len(schema)
    if dataset.n_rows < 1:
        raise OptionError("chow_liu needs at least one row")
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            edges.append((-mutual_information(dataset, i, j, opts.alpha), i, j))
    edges.sort()
    parent_uf = list(range(n))

    def find(v: int) -> int:
        while parent_uf[v] != v:
            parent_uf[v] = parent_uf[parent_uf[v]]
            v = parent_uf[v]
        return v

    adjacency: list[list[int]] = [[] for _ in range(n)]
    for _, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent_uf[max(ri, rj)] = min(ri, rj)
            adjacency[i].append(j)
            adjacency[j].append(i)
    parent = [None] * n
    order = [0]
    seen = {0}
    for v in order:
        for u in sorted(adjacency[v]):
            if u not in seen:
                seen.add(u)
                parent[u] = v
                order.append(u)
    cpds: list[TreeFactor] = []
    for v in range(n):
        p = parent[v]
        if p is None:
            probs = _smoothed_dist(count_marginal(dataset, (v,)).counts, opts.alpha)
            root = dist_leaf(_log_dist(probs))
        else:
            joint = count_marginal(dataset, (p, v)).reshaped()
            children = []
            for x in range(schema.cards[p]):
                probs = _smoothed_dist(joint[x], opts.alpha)
                children.append(dist_leaf(_log_dist(probs)))
            root = Split(p, tuple(children))
        cpds.append(tree_factor(root, schema, target=v))
    return BayesNet(schema, tuple(cpds))


def learn_mt(
    dataset: Dataset,
    opts: LearnOptions = LearnOptions(),
    audit: AuditTrace | None = None,
) -> MixtureOfTrees:
    """EM over a mixture of Chow-Liu trees.

    Responsibilities start from a seeded random soft assignment; each
    M-step refits one weighted tree per component and re-smooths the
    mixture weights; iteration stops at em_iters or when the training
    log-likelihood gain falls below em_threshold.  Smoothing means a
    refit is not the exact expected-likelihood maximizer, so a step that
    lowers the training likelihood is rejected and iteration stops; the
    recorded trace therefore never decreases.
    """
    if opts.k < 1:
        raise OptionError("mixture size k must be at least 1")
    schema = dataset.schema
    k = opts.k
    base_w = dataset.weight_vector()
    rng = seeded_rng(opts.seed).stream("mt_init")
    resp = rng.random((dataset.n_rows, k)) + 1e-3
    resp /= resp.sum(axis=1, keepdims=True)
    model = None
    prev_ll = None
    for _ in range(max(1, opts.em_iters)):
        comps = []
        for j in range(k):
            comps.append(chow_liu(dataset.reweighted(resp[:, j] * base_w), opts))
        mass = (resp * base_w[:, None]).sum(axis=0) + opts.alpha
        log_w = np.log(mass / mass.sum())
        candidate = MixtureOfTrees(schema, log_w, tuple(comps))
        ll = log_likelihood(candidate, dataset)
        if prev_ll is not None and ll < prev_ll:
            break
        model = candidate
        if audit is not None:
            audit.record("em_ll", ll)
        if prev_ll is not None and ll - prev_ll < opts.em_threshold:
            break
        prev_ll = ll
        scores = np.empty((dataset.n_rows, k))
        for i in range(dataset.n_rows):
            for j in range(k):
                scores[i, j] = log_w[j] + bn_row_log_prob(comps[j], dataset.rows[i])
        m = scores.max(axis=1, keepdims=True)
        resp = np.exp(scores - m)
        resp /= resp.sum(axis=1, keepdims=True)
    return model


# ---------------------------------------------------------------------------
# Greedy tree-CPD learners
# ---------------------------------------------------------------------------


class _GrowLeaf:
    __slots__ = ("uid", "rows", "path")

    def __init__(self, uid: int, rows: np.ndarray, path: frozenset):
        self.uid = uid
        self.rows = rows
        self.path = path


class _GrowSplit:
    __slots__ = ("var", "children")

    def __init__(self, var: int, children: list):
        self.var = var
        self.children = children


def _leaf_ll(counts: np.ndarray, alpha: float) -> float:
    probs = _smoothed_dist(counts, alpha)
    nz = counts > 0
    return float((counts[nz] * np.log(probs[nz])).sum())


def _greedy_trees(
    dataset: Dataset,
    opts: LearnOptions,
    acyclic: bool,
    audit: AuditTrace | None,
) -> list[TreeFactor]:
    schema = dataset.schema
    n = len(schema)
    rows = dataset.rows
    w = dataset.weight_vector()

    def target_counts(v: int, idx: np.ndarray) -> np.ndarray:
        return np.bincount(rows[idx, v], weights=w[idx], minlength=schema.cards[v])

    def split_gain(v: int, u: int, idx: np.ndarray) -> float:
        cv, cu = schema.cards[v], schema.cards[u]
        joint = np.bincount(
            rows[idx, u] * cv + rows[idx, v], weights=w[idx], minlength=cu * cv
        ).reshape(cu, cv)
        before = _leaf_ll(joint.sum(axis=0), opts.alpha)
        after = sum(_leaf_ll(joint[x], opts.alpha) for x in range(cu))
        return after - before - opts.kappa * (cu - 1) * (cv - 1)

    uid_counter = 0

    def new_leaf(idx: np.ndarray, path: frozenset) -> _GrowLeaf:
        nonlocal uid_counter
        leaf = _GrowLeaf(uid_counter, idx, path)
        uid_counter += 1
        return leaf

    trees: list = []
    leaves: dict[int, tuple[int, _GrowLeaf]] = {}
    heap: list = []
    all_rows = np.arange(dataset.n_rows)
    for v in range(n):
        leaf = new_leaf(all_rows, frozenset())
        trees.append(leaf)
        leaves[leaf.uid] = (v, leaf)
        for u in range(n):
            if u != v:
                gain = split_gain(v, u, all_rows)
                if gain > 0:
                    heapq.heappush(heap, (-gain, v, u, leaf.uid))

    parents: list[set[int]] = [set() for _ in range(n)]
    leaf_count = [1] * n

    def creates_cycle(u: int, v: int) -> bool:
        stack = [v]
        seen = {v}
        while stack:
            a = stack.pop()
            if a == u:
                return True
            for b in range(n):
                if a in parents[b] and b not in seen:
                    seen.add(b)
                    stack.append(b)
        return False

    score = -opts.kappa * sum(c - 1 for c in schema.cards)
    for v in range(n):
        score += _leaf_ll(target_counts(v, all_rows), opts.alpha)
    if audit is not None:
        audit.record("score", score)

    while heap:
        neg_gain, v, u, uid = heapq.heappop(heap)
        gain = -neg_gain
        if gain <= 1e-12 or uid not in leaves:
            continue
        _, leaf = leaves[uid]
        if opts.max_leaves is not None and leaf_count[v] + schema.cards[u] - 1 > opts.max_leaves:
            continue
        if u not in parents[v]:
            if opts.max_parents is not None and len(parents[v]) >= opts.max_parents:
                continue
            if acyclic and creates_cycle(u, v):
                continue
        children: list = []
        del leaves[uid]
        path = leaf.path | {u}
        vals = rows[leaf.rows, u]
        for x in range(schema.cards[u]):
            child = new_leaf(leaf.rows[vals == x], path)
            children.append(child)
            leaves[child.uid] = (v, child)
            for u2 in range(n):
                if u2 != v and u2 not in path:
                    g = split_gain(v, u2, child.rows)
                    if g > 0:
                        heapq.heappush(heap, (-g, v, u2, child.uid))
        split = _GrowSplit(u, children)
        if trees[v] is leaf:
            trees[v] = split
        else:
            stack = [trees[v]]
            while stack:
                node = stack.pop()
                if isinstance(node, _GrowSplit):
                    for i, c in enumerate(node.children):
                        if c is leaf:
                            node.children[i] = split
                        else:
                            stack.append(c)
        parents[v].add(u)
        leaf_count[v] += schema.cards[u] - 1
        score += gain
        if audit is not None:
            audit.record("score", score)

    def finalize(node, v: int):
        if isinstance(node, _GrowLeaf):
            probs = _smoothed_dist(target_counts(v, node.rows), opts.alpha)
            return dist_leaf(_log_dist(probs))
        return Split(node.var, tuple(finalize(c, v) for c in node.children))

    return [tree_factor(finalize(trees[v], v), schema, target=v) for v in range(n)]


def learn_bn_tree_cpds(
    dataset: Dataset,
    opts: LearnOptions = LearnOptions(),
    audit: AuditTrace | None = None,
) -> BayesNet:
    """Greedy global search over leaf splits, keeping the parent graph acyclic.

    Moves are scored by smoothed log-likelihood gain minus kappa per new
    leaf parameter; the best strictly positive move is applied until none
    remains, with ties broken to the lowest variable then split-variable
    index.
    """
    if dataset.n_rows < 1:
        raise OptionError("cannot learn from an empty dataset")
    return BayesNet(dataset.schema, tuple(_greedy_trees(dataset, opts, True, audit)))


def learn_dn(
    dataset: Dataset,
    opts: LearnOptions = LearnOptions(),
    audit: AuditTrace | None = None,
) -> DependencyNet:
    """Per-variable greedy tree conditionals with no acyclicity constraint."""
    if dataset.n_rows < 1:
        raise OptionError("cannot learn from an empty dataset")
    return DependencyNet(dataset.schema, tuple(_greedy_trees(dataset, opts, False, audit)))


def acbn(
    dataset: Dataset,
    opts: LearnOptions = LearnOptions(),
    audit: AuditTrace | None = None,
) -> tuple[BayesNet, ArithmeticCircuit]:
    """Learn a tree-CPD Bayes net and compile it to an exact circuit.

    If the circuit exceeds the node budget, learning retries with the
    penalty doubled, up to five times, before giving up.
    """
    kappa = opts.kappa
    size = 0
    for _ in range(6):
        attempt = replace(opts, kappa=kappa)
        bn = learn_bn_tree_cpds(dataset, attempt, audit=audit)
        ac = acve_compile(bn)
        size = len(ac.nodes)
        if size <= opts.circuit_cap:
            return bn, ac
        kappa = kappa * 2 if kappa > 0 else 1.0
        if audit is not None:
            audit.record("kappa_retry", kappa)
    raise TractabilityError(
        f"circuit still has {size} nodes after retries (cap {opts.circuit_cap})",
        size=size,
    )


# ---------------------------------------------------------------------------
# Gradient-based parameter learning
# ---------------------------------------------------------------------------


def _ascend(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    w0: np.ndarray,
    opts: OptimOptions,
    audit: AuditTrace | None,
    label: str,
) -> np.ndarray:
    w = np.asarray(w0, dtype=float).copy()
    obj, grad = fun(w)
    if not np.isfinite(obj):
        raise NumericError("objective is not finite at the starting point", iteration=0)
    if audit is not None:
        audit.record(label, obj)
    for it in range(1, opts.max_iters + 1):
        if float(np.abs(grad).max(initial=0.0)) < opts.tol:
            break
        step = opts.step
        accepted = False
        while step >= 1e-14:
            w2 = w + step * grad
            obj2, grad2 = fun(w2)
            if np.isfinite(obj2) and obj2 >= obj - 1e-12:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        w, obj, grad = w2, obj2, grad2
        if not np.isfinite(obj):
            raise NumericError("objective became non-finite", iteration=it)
        if audit is not None:
            audit.record(label, obj)
    return w


def _factor_slots(f: Factor) -> int:
    if isinstance(f, ConjunctiveFeature):
        return 1
    if isinstance(f, TableFactor):
        return f.size
    count = 0
    stack = [f.root]
    while stack:
        node = stack.pop()
        if isinstance(node, Split):
            stack.extend(node.children)
        else:
            count += 1 if node.values.ndim == 0 else node.values.shape[0]
    return count


def _extract_params(mn: MarkovNet) -> np.ndarray:
    out: list[float] = []
    for f in mn.potentials:
        if isinstance(f, ConjunctiveFeature):
            out.append(f.log_weight)
        elif isinstance(f, TableFactor):
            out.extend(f.log_values.tolist())
        else:
            def rec(node):
                if isinstance(node, Split):
                    for c in node.children:
                        rec(c)
                else:
                    out.extend(np.atleast_1d(node.values).tolist())

            rec(f.root)
    return np.asarray(out)


def _with_params(mn: MarkovNet, w: np.ndarray) -> MarkovNet:
    pos = 0
    factors: list[Factor] = []
    for f in mn.potentials:
        if isinstance(f, ConjunctiveFeature):
            factors.append(ConjunctiveFeature(f.literals, float(w[pos]), f.cards))
            pos += 1
        elif isinstance(f, TableFactor):
            k = f.size
            factors.append(TableFactor(f.scope, f.cards, w[pos : pos + k]))
            pos += k
        else:
            def rebuild(node):
                nonlocal pos
                if isinstance(node, Split):
                    return Split(node.var, tuple(rebuild(c) for c in node.children))
                if node.values.ndim == 0:
                    leaf = weight_leaf(float(w[pos]))
                    pos += 1
                    return leaf
                k = node.values.shape[0]
                leaf = Leaf(np.asarray(w[pos : pos + k]))
                pos += k
                return leaf

            factors.append(TreeFactor(rebuild(f.root), f.target, f.scope, f.cards))
    return MarkovNet(mn.schema, tuple(factors))


def _active_slot(f: Factor, offset: int, assignment) -> int | None:
    if isinstance(f, ConjunctiveFeature):
        for lit in f.literals:
            if not lit.satisfied_by(int(assignment[lit.var])):
                return None
        return offset
    if isinstance(f, TableFactor):
        idx = 0
        for v, c in zip(f.scope, f.cards):
            idx = idx * c + int(assignment[v])
        return offset + idx
    pos = 0
    node = f.root
    while True:
        if isinstance(node, Split):
            x = int(assignment[node.var])
            for c in node.children[:x]:
                pos += _subtree_slots(c)
            node = node.children[x]
        else:
            if node.values.ndim == 0:
                return offset + pos
            return offset + pos + int(assignment[f.target])


def _subtree_slots(node) -> int:
    if isinstance(node, Split):
        return sum(_subtree_slots(c) for c in node.children)
    return 1 if node.values.ndim == 0 else node.values.shape[0]


def mn_pl_weights(
    structure: MarkovNet,
    dataset: Dataset,
    opts: OptimOptions = OptimOptions(),
    audit: AuditTrace | None = None,
) -> MarkovNet:
    """Fit all potential parameters by penalized pseudo-likelihood ascent.

    Every feature weight, table cell, and tree leaf entry is a free
    parameter.  The gradient per parameter is its empirical activation
    count minus the expected activation under each row's per-variable
    blanket conditionals, minus the l2 pull.
    """
    structure.schema.require_compatible(dataset.schema, "dataset")
    schema = structure.schema
    n = len(schema)
    rows = dataset.rows
    wts = dataset.weight_vector()
    offsets = []
    pos = 0
    for f in structure.potentials:
        offsets.append(pos)
        pos += _factor_slots(f)
    touching: list[list[int]] = [[] for _ in range(n)]
    for i, f in enumerate(structure.potentials):
        for v in f.scope:
            touching[v].append(i)

    def value_and_grad(w: np.ndarray) -> tuple[float, np.ndarray]:
        mn = _with_params(structure, w)
        obj = -0.5 * opts.l2 * float(w @ w)
        grad = -opts.l2 * w
        for r in range(dataset.n_rows):
            row = rows[r]
            wt = wts[r]
            buf = row.copy()
            for v in range(n):
                probs = markov_blanket_conditional(mn, v, row)
                p = probs[row[v]]
                obj += wt * (math.log(p) if p > 0 else LOG_ZERO)
                for i in touching[v]:
                    f = mn.potentials[i]
                    slot = _active_slot(f, offsets[i], row)
                    if slot is not None:
                        grad[slot] += wt
                    for x in range(schema.cards[v]):
                        buf[v] = x
                        slot = _active_slot(f, offsets[i], buf)
                        if slot is not None:
                            grad[slot] -= wt * probs[x]
                    buf[v] = row[v]
        return obj, grad

    w = _ascend(value_and_grad, _extract_params(structure), opts, audit, "pll")
    return _with_params(structure, w)


def ac_ml_params(
    ac: ArithmeticCircuit,
    dataset: Dataset,
    opts: OptimOptions = OptimOptions(),
    audit: AuditTrace | None = None,
    trainable: Sequence[int] | None = None,
) -> ArithmeticCircuit:
    """Maximum-likelihood circuit constants by gradient ascent in log space.

    The objective is the average normalized log-likelihood, sum over rows
    of log f(row) minus log f(no evidence); gradients come from the
    circuit's own derivatives: clamped minus free expected activation of
    each trainable constant.
    """
    ac.schema.require_compatible(dataset.schema, "dataset")
    if trainable is None:
        const_ids = [
            i for i in ac.constant_ids() if np.isfinite(ac.nodes[i].log_value)
        ]
    else:
        const_ids = list(trainable)
    if not const_ids:
        raise OptionError("circuit has no trainable constants")
    w0 = np.array([ac.nodes[i].log_value for i in const_ids])
    wts = dataset.weight_vector()
    total_wt = float(wts.sum())
    empty = empty_evidence(ac.schema)

    if total_wt <= 0:
        raise OptionError("dataset carries no weight")

    def value_and_grad(w: np.ndarray) -> tuple[float, np.ndarray]:
        # objective and gradient are per unit of row weight, which keeps
        # step sizes meaningful regardless of dataset size
        override = dict(zip(const_ids, w))
        obj = -0.5 * opts.l2 * float(w @ w)
        grad = -opts.l2 * w
        free = differentiate(ac, empty, const_override=override)
        z = free.root_value
        if z == LOG_ZERO:
            return LOG_ZERO, grad
        obj -= z
        for j, cid in enumerate(const_ids):
            d = free.derivatives[cid]
            if d != LOG_ZERO:
                grad[j] -= math.exp(w[j] + d - z)
        for r in range(dataset.n_rows):
            clamped = differentiate(ac, dataset.rows[r], const_override=override)
            val = clamped.root_value
            if val == LOG_ZERO:
                return LOG_ZERO, grad
            obj += wts[r] * val / total_wt
            for j, cid in enumerate(const_ids):
                d = clamped.derivatives[cid]
                if d != LOG_ZERO:
                    grad[j] += wts[r] * math.exp(w[j] + d - val) / total_wt
        return obj, grad

    w = _ascend(value_and_grad, w0, opts, audit, "ll")
    nodes = list(ac.nodes)
    for j, cid in enumerate(const_ids):
        nodes[cid] = Constant(float(w[j]))
    return ArithmeticCircuit(ac.schema, tuple(nodes))
