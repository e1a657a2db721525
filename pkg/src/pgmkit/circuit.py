"""Arithmetic circuits: evaluation, differentiation, MPE, and compilation.

A circuit is a topologically ordered DAG of indicator, constant, product,
and sum nodes whose root computes the model's network polynomial.  One
upward pass evaluates the polynomial at an indicator setting; a downward
pass computes the partial derivative of the root with respect to every
node, from which conditional marginals fall out.  All arithmetic is in
log space: products short-circuit on a zero child and sums use shifted
log-sum-exp.

Compilation follows variable elimination over symbolic tables whose cells
hold circuit-node references instead of numbers.  Eliminating a variable
multiplies the tables that mention it (product nodes) and sums over its
values (sum nodes).  Node construction is hash-consed, so structurally
identical subcircuits are built once; structured factors feed repeated
parameters through shared constant nodes, which is what keeps circuits
compiled from tree and feature potentials compact.  Every sum introduced
by elimination ranges over one variable whose indicator appears in each
summand, so compiled sums are deterministic and MPE decoding is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import (
    LOG_ZERO,
    UNKNOWN,
    Schema,
    empty_evidence,
    log_add,
    log_sum_exp,
)
from .errors import OptionError, ZeroProbabilityEvidenceError
from .factors import factor_log_value
from .models import BayesNet, MarkovNet, MixtureOfTrees, mt_row_log_prob


@dataclass(frozen=True)
class Indicator:
    var: int
    val: int


@dataclass(frozen=True)
class Constant:
    log_value: float


@dataclass(frozen=True)
class Product:
    children: tuple[int, ...]


@dataclass(frozen=True)
class Sum:
    children: tuple[int, ...]


Node = Union[Indicator, Constant, Product, Sum]


@dataclass(frozen=True)
class ArithmeticCircuit:
    schema: Schema
    nodes: tuple[Node, ...]

    @property
    def root(self) -> int:
        return len(self.nodes) - 1

    def indicator_ids(self) -> dict[tuple[int, int], list[int]]:
        out: dict[tuple[int, int], list[int]] = {}
        for i, nd in enumerate(self.nodes):
            if isinstance(nd, Indicator):
                out.setdefault((nd.var, nd.val), []).append(i)
        return out

    def constant_ids(self) -> list[int]:
        return [i for i, nd in enumerate(self.nodes) if isinstance(nd, Constant)]


def validate_circuit(ac: ArithmeticCircuit) -> list[str]:
    """Structural violations: bad ordering, duplicate indicators, bad refs."""
    out: list[str] = []
    seen: set[tuple[int, int]] = set()
    for i, nd in enumerate(ac.nodes):
        if isinstance(nd, Indicator):
            if not (0 <= nd.var < len(ac.schema)) or not (
                0 <= nd.val < ac.schema.cards[nd.var]
            ):
                out.append(f"node {i}: indicator ({nd.var},{nd.val}) out of range")
            elif (nd.var, nd.val) in seen:
                out.append(f"node {i}: duplicate indicator ({nd.var},{nd.val})")
            seen.add((nd.var, nd.val))
        elif isinstance(nd, (Product, Sum)):
            if not nd.children:
                out.append(f"node {i}: empty operator node")
            for c in nd.children:
                if not 0 <= c < i:
                    out.append(f"node {i}: child {c} does not precede it")
    if not ac.nodes:
        out.append("circuit has no nodes")
    return out


class CircuitBuilder:
    """Bottom-up circuit constructor with hash-consing and simplification.

    Indicators are always interned (a circuit carries each (var, val)
    indicator at most once).  With dedupe enabled, constants, products,
    and sums are interned by structure as well; disabling dedupe changes
    node counts but never the value the circuit computes, because the
    value-preserving simplifications stay on.
    """

    def __init__(self, schema: Schema, dedupe: bool = True):
        self.schema = schema
        self.dedupe = dedupe
        self.nodes: list[Node] = []
        self._memo: dict = {}

    def _add(self, key, node: Node) -> int:
        if key is not None and key in self._memo:
            return self._memo[key]
        idx = len(self.nodes)
        self.nodes.append(node)
        if key is not None:
            self._memo[key] = idx
        return idx

    def indicator(self, var: int, val: int) -> int:
        return self._add(("i", var, val), Indicator(var, val))

    def constant(self, log_value: float) -> int:
        log_value = float(log_value) + 0.0
        key = ("c", log_value) if self.dedupe else None
        return self._add(key, Constant(log_value))

    def product(self, children: Sequence[int]) -> int:
        flat: list[int] = []
        for c in children:
            nd = self.nodes[c]
            if isinstance(nd, Constant):
                if nd.log_value == LOG_ZERO:
                    return self.constant(LOG_ZERO)
                if nd.log_value == 0.0:
                    continue
            if isinstance(nd, Product):
                flat.extend(nd.children)
            else:
                flat.append(c)
        if not flat:
            return self.constant(0.0)
        if len(flat) == 1:
            return flat[0]
        tup = tuple(sorted(flat))
        key = ("p", tup) if self.dedupe else None
        return self._add(key, Product(tup))

    def sum_(self, children: Sequence[int]) -> int:
        kept = [
            c
            for c in children
            if not (
                isinstance(self.nodes[c], Constant)
                and self.nodes[c].log_value == LOG_ZERO
            )
        ]
        if not kept:
            return self.constant(LOG_ZERO)
        if len(kept) == 1:
            return kept[0]
        tup = tuple(sorted(kept))
        key = ("s", tup) if self.dedupe else None
        return self._add(key, Sum(tup))

    def finish(self, root: int) -> ArithmeticCircuit:
        """Drop unreachable nodes and freeze, keeping topological order."""
        live = np.zeros(len(self.nodes), dtype=bool)
        stack = [root]
        live[root] = True
        while stack:
            nd = self.nodes[stack.pop()]
            if isinstance(nd, (Product, Sum)):
                for c in nd.children:
                    if not live[c]:
                        live[c] = True
                        stack.append(c)
        remap = np.cumsum(live) - 1
        nodes: list[Node] = []
        for i, nd in enumerate(self.nodes):
            if not live[i]:
                continue
            if isinstance(nd, Product):
                nd = Product(tuple(int(remap[c]) for c in nd.children))
            elif isinstance(nd, Sum):
                nd = Sum(tuple(int(remap[c]) for c in nd.children))
            nodes.append(nd)
        return ArithmeticCircuit(self.schema, tuple(nodes))


def _norm_evidence(schema: Schema, evidence) -> np.ndarray:
    if evidence is None:
        return empty_evidence(schema)
    return schema.check_assignment(evidence, allow_unknown=True)


def _upward(ac: ArithmeticCircuit, ev: np.ndarray, const_override, maximize: bool) -> list[float]:
    vals = [0.0] * len(ac.nodes)
    override = const_override or {}
    for i, nd in enumerate(ac.nodes):
        t = type(nd)
        if t is Indicator:
            known = ev[nd.var]
            vals[i] = 0.0 if known < 0 or known == nd.val else LOG_ZERO
        elif t is Constant:
            vals[i] = override.get(i, nd.log_value)
        elif t is Product:
            s = 0.0
            for c in nd.children:
                v = vals[c]
                if v == LOG_ZERO:
                    s = LOG_ZERO
                    break
                s += v
            vals[i] = s
        else:
            if maximize:
                vals[i] = max(vals[c] for c in nd.children)
            else:
                m = max(vals[c] for c in nd.children)
                if m == LOG_ZERO:
                    vals[i] = LOG_ZERO
                else:
                    vals[i] = m + math.log(
                        sum(math.exp(vals[c] - m) for c in nd.children)
                    )
    return vals


def evaluate(ac: ArithmeticCircuit, evidence=None, const_override=None) -> float:
    """Log value of the circuit polynomial at an indicator setting.

    Indicators contradicting the evidence are clamped to log 0, all others
    to log 1.  For a circuit compiled from a Bayes net this is the log
    probability of the evidence; for a Markov net it is the log of the
    unnormalized measure (normalize by the empty-evidence value, log Z).
    """
    ev = _norm_evidence(ac.schema, evidence)
    return _upward(ac, ev, const_override, maximize=False)[-1]


@dataclass(frozen=True)
class CircuitEvaluation:
    """Per-node log values and log partial derivatives of the root."""

    values: np.ndarray
    derivatives: np.ndarray

    @property
    def root_value(self) -> float:
        return float(self.values[-1])


def differentiate(ac: ArithmeticCircuit, evidence=None, const_override=None) -> CircuitEvaluation:
    """Upward values plus downward derivatives of the root w.r.t. each node."""
    ev = _norm_evidence(ac.schema, evidence)
    vals = _upward(ac, ev, const_override, maximize=False)
    derivs = [LOG_ZERO] * len(ac.nodes)
    derivs[-1] = 0.0
    for i in range(len(ac.nodes) - 1, -1, -1):
        nd = ac.nodes[i]
        d = derivs[i]
        if d == LOG_ZERO:
            continue
        if isinstance(nd, Sum):
            for c in nd.children:
                derivs[c] = log_add(derivs[c], d)
        elif isinstance(nd, Product):
            finite_sum = 0.0
            zero_count = 0
            for c in nd.children:
                v = vals[c]
                if v == LOG_ZERO:
                    zero_count += 1
                    if zero_count > 1:
                        break
                else:
                    finite_sum += v
            if zero_count > 1:
                continue
            for c in nd.children:
                v = vals[c]
                if zero_count == 0:
                    sib = finite_sum - v
                elif v == LOG_ZERO:
                    sib = finite_sum
                else:
                    continue
                derivs[c] = log_add(derivs[c], d + sib)
    return CircuitEvaluation(np.asarray(vals), np.asarray(derivs))


def marginals(ac: ArithmeticCircuit, evidence=None) -> list[np.ndarray]:
    """Per-variable conditional distributions given the evidence.

    Unobserved variables get P(X=x | evidence) proportional to the root
    derivative at Indicator(X, x); observed variables get a point mass.
    """
    ev = _norm_evidence(ac.schema, evidence)
    diff = differentiate(ac, ev)
    if diff.root_value == LOG_ZERO:
        raise ZeroProbabilityEvidenceError("evidence has probability zero")
    ind = ac.indicator_ids()
    out: list[np.ndarray] = []
    for v, card in enumerate(ac.schema.cards):
        dist = np.zeros(card)
        if ev[v] >= 0:
            dist[ev[v]] = 1.0
        else:
            scores = np.full(card, LOG_ZERO)
            for x in range(card):
                ids = ind.get((v, x), [])
                if ids:
                    scores[x] = log_sum_exp(diff.derivatives[ids])
            m = scores.max()
            if m == LOG_ZERO:
                raise ZeroProbabilityEvidenceError(
                    f"variable {v} has no support under the evidence"
                )
            dist = np.exp(scores - m)
            dist /= dist.sum()
        out.append(dist)
    return out


@dataclass(frozen=True)
class MpeResult:
    assignment: np.ndarray
    log_score: float
    exact: bool


def mpe(ac: ArithmeticCircuit, evidence=None) -> MpeResult:
    """Most probable completion of the evidence under the circuit.

    An upward pass with sums replaced by max bounds the best completion;
    the downward decode follows one maximizing child per sum (ties go to
    the lowest node index).  The result is exact when the decoded state
    evaluates back to the bound, which holds whenever every sum's children
    have disjoint support, as compiled circuits here guarantee.
    """
    ev = _norm_evidence(ac.schema, evidence)
    vals = _upward(ac, ev, None, maximize=True)
    if vals[-1] == LOG_ZERO:
        raise ZeroProbabilityEvidenceError("evidence has probability zero")
    assign = ev.copy()
    stack = [len(ac.nodes) - 1]
    seen = set()
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        nd = ac.nodes[i]
        if isinstance(nd, Indicator):
            if assign[nd.var] < 0:
                assign[nd.var] = nd.val
        elif isinstance(nd, Product):
            stack.extend(nd.children)
        elif isinstance(nd, Sum):
            best = nd.children[0]
            for c in nd.children[1:]:
                if vals[c] > vals[best]:
                    best = c
            stack.append(best)
    assign[assign < 0] = 0
    score = vals[-1]
    exact = abs(score - evaluate(ac, assign)) <= 1e-9
    return MpeResult(assign, float(score), exact)


def _interaction_adjacency(model: Union[BayesNet, MarkovNet]) -> list[set[int]]:
    n = len(model.schema)
    adj: list[set[int]] = [set() for _ in range(n)]
    scopes = (
        [cpd.scope for cpd in model.cpds]
        if isinstance(model, BayesNet)
        else [f.scope for f in model.potentials]
    )
    for scope in scopes:
        for a in scope:
            for b in scope:
                if a != b:
                    adj[a].add(b)
    return adj


def elimination_order(
    model: Union[BayesNet, MarkovNet],
    heuristic: str = "min-degree",
    given: Sequence[int] | None = None,
) -> list[int]:
    """Deterministic elimination order; ties break to the lowest index."""
    n = len(model.schema)
    if given is not None:
        order = [int(v) for v in given]
        if sorted(order) != list(range(n)):
            raise OptionError(f"given order {order} is not a permutation of 0..{n - 1}")
        return order
    if heuristic not in ("min-degree", "min-fill"):
        raise OptionError(f"unknown elimination heuristic {heuristic!r}")
    adj = _interaction_adjacency(model)
    remaining = set(range(n))
    order: list[int] = []
    while remaining:
        if heuristic == "min-degree":
            v = min(remaining, key=lambda u: (len(adj[u] & remaining), u))
        else:
            def fill(u: int) -> int:
                nbrs = sorted(adj[u] & remaining)
                return sum(
                    1
                    for i, a in enumerate(nbrs)
                    for b in nbrs[i + 1 :]
                    if b not in adj[a]
                )

            v = min(remaining, key=lambda u: (fill(u), u))
        nbrs = adj[v] & remaining
        for a in nbrs:
            adj[a] |= nbrs - {a}
            adj[a].discard(v)
        remaining.remove(v)
        order.append(v)
    return order


class _SymTable:
    """Dense table of circuit-node references over a sorted scope."""

    __slots__ = ("scope", "cards", "cells")

    def __init__(self, scope: tuple[int, ...], cards: tuple[int, ...], cells: np.ndarray):
        self.scope = scope
        self.cards = cards
        self.cells = cells.reshape(cards or (1,))


def _sym_multiply(b: CircuitBuilder, t1: _SymTable, t2: _SymTable) -> _SymTable:
    card_of = dict(zip(t1.scope, t1.cards))
    card_of.update(zip(t2.scope, t2.cards))
    scope = tuple(sorted(card_of))
    cards = tuple(card_of[v] for v in scope)
    pos1 = [scope.index(v) for v in t1.scope]
    pos2 = [scope.index(v) for v in t2.scope]
    out = np.empty(cards or (1,), dtype=np.int64)
    for config in np.ndindex(*cards):
        c1 = t1.cells[tuple(config[p] for p in pos1)]
        c2 = t2.cells[tuple(config[p] for p in pos2)]
        out[config] = b.product((int(c1), int(c2)))
    return _SymTable(scope, cards, out)


def _sym_sum_out(b: CircuitBuilder, t: _SymTable, v: int) -> _SymTable:
    axis = t.scope.index(v)
    moved = np.moveaxis(t.cells, axis, 0)
    scope = tuple(u for u in t.scope if u != v)
    cards = tuple(c for u, c in zip(t.scope, t.cards) if u != v)
    out = np.empty(cards or (1,), dtype=np.int64)
    for config in np.ndindex(*cards):
        out[config] = b.sum_([int(moved[(x,) + config]) for x in range(t.cards[axis])])
    return _SymTable(scope, cards, out)


def _factor_sym_table(
    b: CircuitBuilder, factor, embed_indicator_for: int | None
) -> _SymTable:
    scope = factor.scope
    cards = factor.cards
    size = int(np.prod(cards)) if cards else 1
    cells = np.empty(size, dtype=np.int64)
    buf = np.full((max(scope) + 1) if scope else 1, UNKNOWN, dtype=np.int64)
    for i, config in enumerate(np.ndindex(*cards)):
        for v, x in zip(scope, config):
            buf[v] = x
        const = b.constant(factor_log_value(factor, buf))
        if embed_indicator_for is None:
            cells[i] = const
        else:
            lam = b.indicator(embed_indicator_for, int(buf[embed_indicator_for]))
            cells[i] = b.product((const, lam))
    return _SymTable(scope, cards, cells)


def acve_compile(
    model: Union[BayesNet, MarkovNet],
    order: Sequence[int] | None = None,
    heuristic: str = "min-degree",
    dedupe: bool = True,
) -> ArithmeticCircuit:
    """Compile a model into an exact arithmetic circuit by elimination.

    Each conditional of a Bayes net enters as a symbolic table whose cells
    multiply the parameter constant with the target's indicator; Markov
    net potentials enter as constant tables plus one indicator table per
    variable, so every indicator occurs linearly in the polynomial and
    derivative-based marginals are exact.
    """
    schema = model.schema
    b = CircuitBuilder(schema, dedupe=dedupe)
    tables: list[_SymTable] = []
    if isinstance(model, BayesNet):
        for v, cpd in enumerate(model.cpds):
            tables.append(_factor_sym_table(b, cpd, embed_indicator_for=v))
    else:
        for f in model.potentials:
            if f.scope:
                tables.append(_factor_sym_table(b, f, embed_indicator_for=None))
            else:
                tables.append(
                    _SymTable((), (), np.array([b.constant(factor_log_value(f, [0]))]))
                )
        for v in range(len(schema)):
            cells = np.array([b.indicator(v, x) for x in range(schema.cards[v])])
            tables.append(_SymTable((v,), (schema.cards[v],), cells))
    elim = elimination_order(model, heuristic=heuristic, given=order)
    for v in elim:
        group = [t for t in tables if v in t.scope]
        tables = [t for t in tables if v not in t.scope]
        if not group:
            continue
        prod = group[0]
        for t in group[1:]:
            prod = _sym_multiply(b, prod, t)
        tables.append(_sym_sum_out(b, prod, v))
    root = b.product([int(t.cells.reshape(-1)[0]) for t in tables])
    return b.finish(root)


def mt_log_prob(mt: MixtureOfTrees, evidence=None) -> float:
    """Exact log probability of evidence under a mixture of trees."""
    circuits = [acve_compile(comp) for comp in mt.components]
    ev = _norm_evidence(mt.schema, evidence)
    scores = np.asarray(
        [w + evaluate(ac, ev) for w, ac in zip(mt.log_mix_weights, circuits)]
    )
    return float(log_sum_exp(scores))


def mt_marginals(mt: MixtureOfTrees, evidence=None) -> list[np.ndarray]:
    """Exact conditional marginals under a mixture of trees."""
    ev = _norm_evidence(mt.schema, evidence)
    circuits = [acve_compile(comp) for comp in mt.components]
    joint = np.asarray(
        [w + evaluate(ac, ev) for w, ac in zip(mt.log_mix_weights, circuits)]
    )
    total = log_sum_exp(joint)
    if total == LOG_ZERO:
        raise ZeroProbabilityEvidenceError("evidence has probability zero")
    post = np.exp(joint - total)
    out: list[np.ndarray] = []
    comp_marg = [marginals(ac, ev) for ac in circuits]
    for v, card in enumerate(mt.schema.cards):
        dist = np.zeros(card)
        for k in range(len(mt.components)):
            dist += post[k] * comp_marg[k][v]
        dist /= dist.sum()
        out.append(dist)
    return out


def mt_map(mt: MixtureOfTrees, evidence=None) -> MpeResult:
    """Heuristic MAP for a mixture: best per-component MPE candidate.

    Each component's exact MPE state is rescored under the full mixture
    and the best candidate is returned; the result is flagged approximate
    because the mixture optimum may lie off every component's optimum.
    """
    ev = _norm_evidence(mt.schema, evidence)
    best_assign = None
    best_score = LOG_ZERO
    for comp in mt.components:
        ac = acve_compile(comp)
        try:
            cand = mpe(ac, ev).assignment
        except ZeroProbabilityEvidenceError:
            continue
        score = mt_row_log_prob(mt, cand)
        if score > best_score:
            best_score = score
            best_assign = cand
    if best_assign is None:
        raise ZeroProbabilityEvidenceError("evidence has probability zero")
    return MpeResult(best_assign, float(best_score), False)
