"""Approximate inference: Gibbs, loopy BP, mean field, ICM, max-product.

Belief propagation and mean field run over a factor-graph view of the
model.  Factor-to-variable messages and mean-field expectations are
computed directly on structured factors: conjunctive features have a
closed form (the product of each literal's satisfaction mass), trees are
traversed once per message with branch masses accumulated along the way,
and only dense tables are enumerated.  A factor's full table is never
materialized, which is what keeps a wide feature over dozens of variables
cheap.

All algorithms are deterministic given (model, evidence, options): the
schedules are fixed (flooding for BP, index order for coordinate methods)
and every random draw comes from a named stream of the run's seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .core import (
    LOG_ZERO,
    UNKNOWN,
    Schema,
    empty_evidence,
    log_add,
    log_sum_exp,
)
from .diagnostics import AuditTrace, seeded_rng
from .errors import NumericError, OptionError
from .factors import (
    ConjunctiveFeature,
    Factor,
    Leaf,
    Split,
    TableFactor,
    TreeFactor,
    condition,
    factor_log_value,
)
from .models import (
    BayesNet,
    DependencyNet,
    MarkovNet,
    cpd_distribution,
    markov_blanket_conditional,
    state_log_measure,
)

GraphModel = Union[BayesNet, MarkovNet, DependencyNet]


@dataclass(frozen=True)
class FactorGraph:
    """Bipartite variable/factor incidence over a shared schema."""

    schema: Schema
    factors: tuple[Factor, ...]

    def var_to_factors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(len(self.schema))]
        for i, f in enumerate(self.factors):
            for v in f.scope:
                out[v].append(i)
        return out


def factor_graph(model: Union[BayesNet, MarkovNet]) -> FactorGraph:
    """Factor-graph view; Bayes nets enter through their conditionals."""
    if isinstance(model, BayesNet):
        return FactorGraph(model.schema, tuple(model.cpds))
    if isinstance(model, MarkovNet):
        return FactorGraph(model.schema, tuple(model.potentials))
    raise OptionError(f"no factor-graph view for {type(model).__name__}")


@dataclass(frozen=True)
class InferenceOptions:
    max_iters: int = 50
    threshold: float = 1e-6
    damping: float = 0.0
    burn_in: int = 1000
    samples: int = 10000
    seed: int = 0
    init: str = "uniform"

    def __post_init__(self):
        if self.max_iters < 1:
            raise OptionError("max_iters must be at least 1")
        if self.threshold <= 0:
            raise OptionError("threshold must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise OptionError("damping must lie in [0, 1)")
        if self.burn_in < 0 or self.samples < 1:
            raise OptionError("burn_in must be >= 0 and samples >= 1")
        if self.init not in ("uniform", "random"):
            raise OptionError(f"unknown init {self.init!r}")


@dataclass
class MarginalReport:
    marginals: list[np.ndarray]
    converged: bool
    iterations_used: int
    trace: AuditTrace = field(default_factory=AuditTrace)


def _ev(schema: Schema, evidence) -> np.ndarray:
    if evidence is None:
        return empty_evidence(schema)
    return schema.check_assignment(evidence, allow_unknown=True)


# ---------------------------------------------------------------------------
# Structured factor-to-variable messages (sum-product)
# ---------------------------------------------------------------------------


def _msg_feature(f: ConjunctiveFeature, v: int, incoming) -> np.ndarray:
    lit_v = None
    others_sat = 1.0
    for lit in f.literals:
        if lit.var == v:
            lit_v = lit
            continue
        m = np.exp(incoming[lit.var])
        p = m[lit.value]
        others_sat *= (1.0 - p) if lit.negated else p
    card = f.cards[f.scope.index(v)]
    out = np.ones(card)
    bump = (math.exp(f.log_weight) - 1.0) * others_sat
    for x in range(card):
        if lit_v.satisfied_by(x):
            out[x] += bump
    return np.log(out)


def _msg_tree(f: TreeFactor, v: int, incoming) -> np.ndarray:
    card = f.cards[f.scope.index(v)]
    out = np.zeros(card)

    def rec(node, mass: float, pinned):
        if mass == 0.0:
            return
        if isinstance(node, Split):
            if node.var == v:
                for x, child in enumerate(node.children):
                    rec(child, mass, x)
            else:
                m = np.exp(incoming[node.var])
                for x, child in enumerate(node.children):
                    rec(child, mass * m[x], pinned)
            return
        if f.target is not None and f.target == v:
            out[:] += mass * np.exp(node.values)
            return
        if f.target is None:
            w = math.exp(float(node.values))
        else:
            w = float(np.exp(incoming[f.target]) @ np.exp(node.values))
        if pinned is None:
            out[:] += mass * w
        else:
            out[pinned] += mass * w

    rec(f.root, 1.0, None)
    with np.errstate(divide="ignore"):
        return np.log(out)


def _msg_enumerate(f: Factor, v: int, incoming, maximize: bool) -> np.ndarray:
    scope, cards = f.scope, f.cards
    card_v = cards[scope.index(v)]
    others = [(u, c) for u, c in zip(scope, cards) if u != v]
    out = np.full(card_v, LOG_ZERO)
    buf = np.full(max(scope) + 1, UNKNOWN, dtype=np.int64)
    for config in np.ndindex(*(c for _, c in others)):
        base = 0.0
        for (u, _), x in zip(others, config):
            buf[u] = x
            base += incoming[u][x]
        if base == LOG_ZERO:
            continue
        for x in range(card_v):
            buf[v] = x
            val = base + factor_log_value(f, buf)
            out[x] = max(out[x], val) if maximize else log_add(out[x], val)
    return out


def _factor_to_var(f: Factor, v: int, incoming, maximize: bool) -> np.ndarray:
    if maximize or isinstance(f, TableFactor):
        return _msg_enumerate(f, v, incoming, maximize)
    if isinstance(f, ConjunctiveFeature):
        return _msg_feature(f, v, incoming)
    return _msg_tree(f, v, incoming)


def _normalize_log(msg: np.ndarray) -> np.ndarray:
    total = log_sum_exp(msg)
    if total == LOG_ZERO:
        raise NumericError("message lost all mass")
    return msg - total


def _bp_loop(
    fg: FactorGraph, evidence, opts: InferenceOptions, maximize: bool
) -> tuple[list[np.ndarray], bool, int, AuditTrace, list[int]]:
    schema = fg.schema
    ev = _ev(schema, evidence)
    conditioned = [condition(f, ev) for f in fg.factors]
    live = [i for i, f in enumerate(conditioned) if len(f.scope) > 0]
    trace = AuditTrace()
    hub = seeded_rng(opts.seed)

    def fresh(card: int, name: str) -> np.ndarray:
        if opts.init == "uniform":
            return np.full(card, -math.log(card))
        u = hub.stream("bp_init:" + name).random(card) + 1e-3
        return np.log(u / u.sum())

    msg_fv = {}
    msg_vf = {}
    for i in live:
        for v in conditioned[i].scope:
            card = schema.cards[v]
            msg_fv[(i, v)] = fresh(card, f"f{i}.{v}")
            msg_vf[(i, v)] = fresh(card, f"v{v}.{i}")
    touching: dict[int, list[int]] = {}
    for i in live:
        for v in conditioned[i].scope:
            touching.setdefault(v, []).append(i)

    converged = False
    iters = 0
    for it in range(opts.max_iters):
        iters = it + 1
        delta = 0.0
        new_fv = {}
        for i in live:
            f = conditioned[i]
            incoming = {u: msg_vf[(i, u)] for u in f.scope}
            for v in f.scope:
                raw = _normalize_log(_factor_to_var(f, v, incoming, maximize))
                if opts.damping > 0.0:
                    raw = _normalize_log(
                        opts.damping * msg_fv[(i, v)] + (1.0 - opts.damping) * raw
                    )
                delta = max(
                    delta, float(np.abs(np.exp(raw) - np.exp(msg_fv[(i, v)])).max())
                )
                new_fv[(i, v)] = raw
        msg_fv = new_fv
        for v, facs in touching.items():
            for i in facs:
                total = np.zeros(schema.cards[v])
                for j in facs:
                    if j != i:
                        total = total + msg_fv[(j, v)]
                msg_vf[(i, v)] = _normalize_log(total) if facs else total
        trace.record("delta", delta)
        if delta < opts.threshold:
            converged = True
            break

    beliefs: list[np.ndarray] = []
    for v in range(len(schema)):
        card = schema.cards[v]
        if ev[v] >= 0:
            b = np.full(card, LOG_ZERO)
            b[ev[v]] = 0.0
        else:
            b = np.zeros(card)
            for i in touching.get(v, []):
                b = b + msg_fv[(i, v)]
        beliefs.append(b)
    return beliefs, converged, iters, trace, live


def loopy_bp(fg: FactorGraph, evidence=None, opts: InferenceOptions = InferenceOptions()) -> MarginalReport:
    """Sum-product message passing with a flooding schedule.

    Messages are normalized every update; damping blends old and new
    messages in log space.  Convergence is declared when the largest
    entrywise change of any factor-to-variable message (in probability
    space) drops below the threshold.  Exact on acyclic graphs.
    """
    beliefs, converged, iters, trace, _ = _bp_loop(fg, evidence, opts, maximize=False)
    marginals = []
    for b in beliefs:
        p = np.exp(b - b.max())
        marginals.append(p / p.sum())
    return MarginalReport(marginals, converged, iters, trace)


@dataclass(frozen=True)
class MapResult:
    assignment: np.ndarray
    log_score: float
    converged: bool
    iterations_used: int


def max_product(fg: FactorGraph, evidence=None, opts: InferenceOptions = InferenceOptions()) -> MapResult:
    """Max-product message passing; decodes per-variable max-beliefs.

    Ties decode to the lowest value.  Exact on acyclic graphs; on loopy
    graphs the best decode found so far is returned with converged=False.
    """
    ev = _ev(fg.schema, evidence)
    beliefs, converged, iters, _, _ = _bp_loop(fg, evidence, opts, maximize=True)
    assign = ev.copy()
    for v in range(len(fg.schema)):
        if assign[v] < 0:
            assign[v] = int(np.argmax(beliefs[v]))
    score = float(sum(factor_log_value(f, assign) for f in fg.factors))
    return MapResult(assign, score, converged, iters)


# ---------------------------------------------------------------------------
# Mean field
# ---------------------------------------------------------------------------


def _expect_feature(f: ConjunctiveFeature, v: int, q) -> np.ndarray:
    lit_v = None
    others_sat = 1.0
    for lit in f.literals:
        if lit.var == v:
            lit_v = lit
            continue
        p = q[lit.var][lit.value]
        others_sat *= (1.0 - p) if lit.negated else p
    card = f.cards[f.scope.index(v)]
    out = np.zeros(card)
    for x in range(card):
        if lit_v.satisfied_by(x):
            out[x] = f.log_weight * others_sat
    return out


def _expect_tree(f: TreeFactor, v: int, q) -> np.ndarray:
    card = f.cards[f.scope.index(v)]
    out = np.zeros(card)
    hard_zero = np.zeros(card, dtype=bool)

    def leaf_term(node: Leaf) -> float:
        if f.target is None:
            return float(node.values)
        total = 0.0
        for x, lp in enumerate(node.values):
            p = q[f.target][x]
            if p == 0.0:
                continue
            if lp == LOG_ZERO:
                return LOG_ZERO
            total += p * lp
        return total

    def add(idx, mass: float, term: float):
        if term == LOG_ZERO:
            if idx is None:
                hard_zero[:] = True
            else:
                hard_zero[idx] = True
        elif idx is None:
            out[:] += mass * term
        else:
            out[idx] += mass * term

    def rec(node, mass: float, pinned):
        if mass == 0.0:
            return
        if isinstance(node, Split):
            if node.var == v:
                for x, child in enumerate(node.children):
                    rec(child, mass, x)
            else:
                for x, child in enumerate(node.children):
                    rec(child, mass * q[node.var][x], pinned)
            return
        if f.target is not None and f.target == v:
            for x, lp in enumerate(node.values):
                add(x, mass, float(lp))
            return
        add(pinned, mass, leaf_term(node))

    rec(f.root, 1.0, None)
    out[hard_zero] = LOG_ZERO
    return out


def _expect_table(f: TableFactor, v: int, q) -> np.ndarray:
    card_v = f.cards[f.scope.index(v)]
    others = [(u, c) for u, c in zip(f.scope, f.cards) if u != v]
    out = np.zeros(card_v)
    hard_zero = np.zeros(card_v, dtype=bool)
    buf = np.full(max(f.scope) + 1, UNKNOWN, dtype=np.int64)
    for config in np.ndindex(*(c for _, c in others)):
        prob = 1.0
        for (u, _), x in zip(others, config):
            buf[u] = x
            prob *= q[u][x]
        if prob == 0.0:
            continue
        for x in range(card_v):
            buf[v] = x
            lv = factor_log_value(f, buf)
            if lv == LOG_ZERO:
                hard_zero[x] = True
            else:
                out[x] += prob * lv
    out[hard_zero] = LOG_ZERO
    return out


def _expect(f: Factor, v: int, q) -> np.ndarray:
    if isinstance(f, ConjunctiveFeature):
        return _expect_feature(f, v, q)
    if isinstance(f, TreeFactor):
        return _expect_tree(f, v, q)
    return _expect_table(f, v, q)


def _model_factors(model: GraphModel) -> tuple[Factor, ...]:
    if isinstance(model, MarkovNet):
        return model.potentials
    return tuple(model.cpds)


def mean_field(model: GraphModel, evidence=None, opts: InferenceOptions = InferenceOptions()) -> MarginalReport:
    """Fully factorized variational fit by coordinate ascent.

    Variables update in index order; each update sets log q(x_v)
    proportional to the expected log of the factors touching v under the
    current q.  The variational objective (expected energy plus entropy)
    is recorded once per sweep and never decreases for Bayes and Markov
    nets, whose updates are exact coordinate maximizations.
    """
    schema = model.schema
    ev = _ev(schema, evidence)
    factors = [condition(f, ev) for f in _model_factors(model)]
    hidden = [v for v in range(len(schema)) if ev[v] < 0]
    touching: dict[int, list[int]] = {v: [] for v in hidden}
    for i, f in enumerate(factors):
        for v in f.scope:
            touching[v].append(i)
    hub = seeded_rng(opts.seed)
    q: list[np.ndarray] = []
    for v in range(len(schema)):
        card = schema.cards[v]
        if ev[v] >= 0:
            dist = np.zeros(card)
            dist[ev[v]] = 1.0
        elif opts.init == "uniform":
            dist = np.full(card, 1.0 / card)
        else:
            u = hub.stream(f"mf_init:{v}").random(card) + 1e-3
            dist = u / u.sum()
        q.append(dist)

    def objective() -> float:
        energy = 0.0
        for f in factors:
            if not f.scope:
                energy += factor_log_value(f, np.zeros(len(schema), dtype=np.int64))
                continue
            v = f.scope[0]
            contrib = _expect(f, v, q)
            for x in range(schema.cards[v]):
                p = q[v][x]
                if p > 0:
                    if contrib[x] == LOG_ZERO:
                        return LOG_ZERO
                    energy += p * contrib[x]
        entropy = 0.0
        for v in hidden:
            p = q[v]
            nz = p > 0
            entropy -= float((p[nz] * np.log(p[nz])).sum())
        return energy + entropy

    trace = AuditTrace()
    converged = False
    iters = 0
    for it in range(opts.max_iters):
        iters = it + 1
        delta = 0.0
        for v in hidden:
            scores = np.zeros(schema.cards[v])
            for i in touching[v]:
                scores = scores + _expect(factors[i], v, q)
            m = scores.max()
            if m == LOG_ZERO:
                raise NumericError(f"variable {v} lost all mass in mean field")
            new_q = np.exp(scores - m)
            new_q /= new_q.sum()
            delta = max(delta, float(np.abs(new_q - q[v]).max()))
            q[v] = new_q
        trace.record("objective", objective())
        trace.record("delta", delta)
        if delta < opts.threshold:
            converged = True
            break
    return MarginalReport([p.copy() for p in q], converged, iters, trace)


# ---------------------------------------------------------------------------
# Gibbs sampling and ICM
# ---------------------------------------------------------------------------

_CACHE_LIMIT = 4096


def _conditional_fn(model: GraphModel) -> Callable[[int, np.ndarray], np.ndarray]:
    if isinstance(model, DependencyNet):
        return lambda v, state: cpd_distribution(model.cpds[v], v, state)
    return lambda v, state: markov_blanket_conditional(model, v, state)


def _blanket_vars(model: GraphModel, v: int) -> set[int]:
    if isinstance(model, DependencyNet):
        return set(model.cpds[v].scope) - {v}
    facs = model.cpds if isinstance(model, BayesNet) else model.potentials
    out: set[int] = set()
    for f in facs:
        if v in f.scope:
            out |= set(f.scope)
    out.discard(v)
    return out


def _init_state(schema: Schema, ev: np.ndarray, hidden, hub) -> np.ndarray:
    state = ev.copy()
    rng = hub.stream("init")
    for v in hidden:
        state[v] = int(rng.integers(schema.cards[v]))
    return state


def gibbs(model: GraphModel, evidence=None, opts: InferenceOptions = InferenceOptions()) -> MarginalReport:
    """Systematic-scan Gibbs sampler; dependency nets run ordered pseudo-Gibbs.

    Evidence variables stay clamped and report exact point marginals.
    After burn-in, every sweep contributes one count per variable, and
    reported marginals are add-one smoothed sample frequencies.
    """
    schema = model.schema
    ev = _ev(schema, evidence)
    hidden = [v for v in range(len(schema)) if ev[v] < 0]
    hub = seeded_rng(opts.seed)
    trace = AuditTrace()
    if not hidden:
        marginals = []
        for v in range(len(schema)):
            dist = np.zeros(schema.cards[v])
            dist[ev[v]] = 1.0
            marginals.append(dist)
        return MarginalReport(marginals, True, 0, trace)

    cond = _conditional_fn(model)
    state = _init_state(schema, ev, hidden, hub)

    # Per-variable sampling plans: small blankets get a cached CDF table
    # indexed by the blanket configuration, the rest fall back to direct
    # conditional evaluation.
    plans = []
    for v in hidden:
        bvars = sorted(u for u in _blanket_vars(model, v) if ev[u] < 0)
        space = 1
        for u in bvars:
            space *= schema.cards[u]
        if space <= _CACHE_LIMIT:
            strides = []
            acc = 1
            for u in reversed(bvars):
                strides.append(acc)
                acc *= schema.cards[u]
            strides = list(reversed(strides))
            table = []
            buf = state.copy()
            for idx in range(space):
                rem = idx
                for u, s in zip(bvars, strides):
                    buf[u] = rem // s
                    rem %= s
                cdf = np.cumsum(cond(v, buf)).tolist()
                cdf[-1] = 2.0
                table.append(cdf)
            plans.append((v, bvars, strides, table, None))
        else:
            plans.append((v, None, None, None, cond))

    total_sweeps = opts.burn_in + opts.samples
    draws = hub.stream("gibbs").random(total_sweeps * len(hidden)).tolist()
    counts = {v: [0] * schema.cards[v] for v in hidden}
    st = state.tolist()
    checkpoint = max(1, opts.samples // 20)
    prev_snapshot = None
    d = 0
    for sweep in range(total_sweeps):
        for v, bvars, strides, table, fallback in plans:
            u = draws[d]
            d += 1
            if table is not None:
                idx = 0
                for bv, s in zip(bvars, strides):
                    idx += st[bv] * s
                row = table[idx]
                x = 0
                while row[x] < u:
                    x += 1
            else:
                probs = fallback(v, np.asarray(st))
                x = int(np.searchsorted(np.cumsum(probs), u))
                x = min(x, len(probs) - 1)
            st[v] = x
        if sweep >= opts.burn_in:
            for v in hidden:
                counts[v][st[v]] += 1
            done = sweep - opts.burn_in + 1
            if done % checkpoint == 0:
                snapshot = {
                    v: [c / done for c in counts[v]] for v in hidden
                }
                if prev_snapshot is not None:
                    drift = max(
                        abs(a - b)
                        for v in hidden
                        for a, b in zip(snapshot[v], prev_snapshot[v])
                    )
                    trace.record("drift", drift)
                prev_snapshot = snapshot

    marginals = []
    for v in range(len(schema)):
        card = schema.cards[v]
        if ev[v] >= 0:
            dist = np.zeros(card)
            dist[ev[v]] = 1.0
        else:
            c = np.asarray(counts[v], dtype=float) + 1.0
            dist = c / (opts.samples + card)
        marginals.append(dist)
    return MarginalReport(marginals, True, opts.samples, trace)


@dataclass(frozen=True)
class IcmResult:
    assignment: np.ndarray
    log_score: float
    converged: bool
    sweeps: int


def icm(model: GraphModel, evidence=None, opts: InferenceOptions = InferenceOptions()) -> IcmResult:
    """Iterated conditional modes: greedy per-variable argmax sweeps.

    Stops at the first sweep that changes nothing (or at max_iters).  For
    Bayes and Markov nets each flip cannot decrease the joint measure.
    """
    schema = model.schema
    ev = _ev(schema, evidence)
    hidden = [v for v in range(len(schema)) if ev[v] < 0]
    hub = seeded_rng(opts.seed)
    state = _init_state(schema, ev, hidden, hub)
    cond = _conditional_fn(model)
    converged = False
    sweeps = 0
    for _ in range(opts.max_iters):
        sweeps += 1
        changed = False
        for v in hidden:
            x = int(np.argmax(cond(v, state)))
            if x != state[v]:
                state[v] = x
                changed = True
        if not changed:
            converged = True
            break
    return IcmResult(state, state_log_measure(model, state), converged, sweeps)
