"""File formats: datasets, evidence, and every model representation.

Data files are comma-separated zero-based value indices, one instance per
line.  Evidence and query files use the same layout plus ``*`` for an
unknown value.  Model files are line-oriented UTF-8 with a shared header
(format tag, variable count, cardinalities) and a per-format body:

* ``.bn``/``.dn``: one ``cpd <var>`` record per variable, in variable
  order, followed by a parenthesized tree: ``(leaf p0 p1 ...)`` with
  linear-space probabilities, or ``(split <var> <subtree>...)`` with one
  subtree per value.  Tabular conditionals are written as the equivalent
  tree, so trees are the canonical on-disk form.
* ``.mn``: ``features <m>`` then m lines ``<weight> <lit> ...`` with
  ``v<i>=<val>`` or ``v<i>!=<val>`` literals, followed by any number of
  ``(table <scope...> <values...>)`` and ``(tree <scope...> <expr>)``
  records.  Trees whose leaves hold a distribution name the target as
  the first scope entry; weight-leaf trees have single-value leaves.
* ``.ac``/``.spn``: ``nodes <k>`` then k topologically ordered lines,
  children strictly earlier: ``v <var> <val>``, ``c <value>``,
  ``* <k> <children...>``, ``+ <k> <children...>``; sum lines in ``.spn``
  carry ``<weight> <child>`` pairs instead.  The last node is the root.
* ``.mt``: ``components <k>`` then per component ``component <weight>``
  followed by a full set of ``cpd`` records.
* ``.uai``: the MARKOV/BAYES interchange layout; tables are row-major
  with the last scope variable fastest.  ``.evid`` files hold
  ``<k> <var> <val> ...`` per line.

All parameters are serialized in linear space with shortest round-trip
decimals and converted to logs on load.  Parsers consume exactly the
declared counts and reject trailing content, reporting syntax problems as
ParseError with a line number and invariant problems (via the model
validators) as ValidationError.
"""

from __future__ import annotations

import logging
import math
import re
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .circuit import (
    ArithmeticCircuit,
    Constant,
    Indicator,
    Product,
    Sum,
    validate_circuit,
)
from .core import LOG_ZERO, UNKNOWN, Dataset, Schema
from .errors import (
    InputError,
    ParseError,
    UnsupportedConversionError,
    ValidationError,
)
from .factors import (
    ConjunctiveFeature,
    Leaf,
    Literal,
    Split,
    TableFactor,
    TreeFactor,
    as_table,
    conjunctive_feature,
    dist_leaf,
    tree_factor,
    weight_leaf,
)
from .models import (
    BayesNet,
    DependencyNet,
    MarkovNet,
    MixtureOfTrees,
    bn_to_mn,
    validate,
)
from .spn import (
    IndicatorLeaf,
    SpnProduct,
    SumProductNetwork,
    WeightedSum,
    validate_spn,
)

logger = logging.getLogger("pgmkit")

Model = Union[
    BayesNet, MarkovNet, DependencyNet, MixtureOfTrees, ArithmeticCircuit, SumProductNetwork
]

_EXTENSIONS = {
    ".bn": "bn",
    ".mn": "mn",
    ".dn": "dn",
    ".ac": "ac",
    ".spn": "spn",
    ".uai": "uai",
    ".mt": "mt",
}

MODEL_FORMATS = ("bn", "mn", "dn", "ac", "spn", "uai", "mt")


def _fmt(x: float) -> str:
    return repr(float(x))


def _lin(log_value: float) -> str:
    return _fmt(math.exp(log_value))


def _to_log(linear: float, line: int | None = None) -> float:
    if math.isnan(linear) or linear == math.inf or linear < 0:
        raise ParseError(f"parameter {linear!r} is not a finite nonnegative number", line)
    return math.log(linear) if linear > 0 else LOG_ZERO


def _int(tok: str, line: int | None, what: str = "integer") -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected {what}, found {tok!r}", line) from None


def _float(tok: str, line: int | None) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, found {tok!r}", line) from None


# ---------------------------------------------------------------------------
# Datasets and evidence
# ---------------------------------------------------------------------------


def _data_rows(text: str, allow_unknown: bool):
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        row = []
        for tok in line.split(","):
            tok = tok.strip()
            if tok == "*":
                if not allow_unknown:
                    raise ParseError("'*' is only allowed in evidence files", lineno)
                row.append(UNKNOWN)
            else:
                val = _int(tok, lineno, "value index")
                if val < 0:
                    raise ParseError(f"negative value {val}", lineno)
                row.append(val)
        yield lineno, row


def load_dataset(text: str, schema: Schema | None = None) -> Dataset:
    """Parse comma-separated instances; infers cardinalities if no schema.

    Inferred cardinality is (max value + 1) per column, floored at 2.
    """
    rows = []
    width = None
    for lineno, row in _data_rows(text, allow_unknown=False):
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"expected {width} values, found {len(row)}", lineno)
        if schema is not None:
            if len(row) != len(schema):
                raise ParseError(f"expected {len(schema)} values, found {len(row)}", lineno)
            for v, x in enumerate(row):
                if x >= schema.cards[v]:
                    raise ParseError(
                        f"value {x} exceeds cardinality {schema.cards[v]} of variable {v}",
                        lineno,
                    )
        rows.append(row)
    if schema is None:
        if not rows:
            raise ParseError("cannot infer a schema from an empty data file")
        arr = np.asarray(rows, dtype=np.int64)
        cards = [max(2, int(arr[:, v].max()) + 1) for v in range(arr.shape[1])]
        schema = Schema.of_cards(cards)
    arr = (
        np.asarray(rows, dtype=np.int64)
        if rows
        else np.empty((0, len(schema)), dtype=np.int64)
    )
    return Dataset(schema, arr)


def dump_dataset(dataset: Dataset) -> str:
    return "".join(
        ",".join(str(int(x)) for x in row) + "\n" for row in dataset.rows
    )


def load_evidence(text: str, schema: Schema) -> list[np.ndarray]:
    """Parse evidence lines; '*' marks an unknown value."""
    out = []
    for lineno, row in _data_rows(text, allow_unknown=True):
        if len(row) != len(schema):
            raise ParseError(f"expected {len(schema)} values, found {len(row)}", lineno)
        for v, x in enumerate(row):
            if x != UNKNOWN and x >= schema.cards[v]:
                raise ParseError(
                    f"value {x} exceeds cardinality {schema.cards[v]} of variable {v}",
                    lineno,
                )
        out.append(np.asarray(row, dtype=np.int64))
    return out


def dump_evidence(cases: Sequence[np.ndarray]) -> str:
    lines = []
    for case in cases:
        lines.append(",".join("*" if int(x) == UNKNOWN else str(int(x)) for x in case))
    return "".join(line + "\n" for line in lines)


def load_uai_evidence(text: str, schema: Schema) -> list[np.ndarray]:
    """UAI-style evidence: per line, a pair count then (var, val) pairs."""
    out = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        toks = raw.split()
        if not toks:
            continue
        k = _int(toks[0], lineno, "pair count")
        if len(toks) != 1 + 2 * k:
            raise ParseError(f"expected {2 * k} entries after the count", lineno)
        case = np.full(len(schema), UNKNOWN, dtype=np.int64)
        for i in range(k):
            var = _int(toks[1 + 2 * i], lineno, "variable index")
            val = _int(toks[2 + 2 * i], lineno, "value index")
            if not 0 <= var < len(schema) or not 0 <= val < schema.cards[var]:
                raise ParseError(f"pair ({var},{val}) out of range", lineno)
            case[var] = val
        out.append(case)
    return out


def load_evidence_path(path: str | Path, schema: Schema) -> list[np.ndarray]:
    """Evidence loader dispatching on extension: '.evid' means UAI pairs."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".evid":
        return load_uai_evidence(text, schema)
    return load_evidence(text, schema)


# ---------------------------------------------------------------------------
# Line and token cursors
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")


class _Lines:
    def __init__(self, text: str):
        self.raw = text.split("\n")
        self.pos = 0

    def next(self, what: str = "line") -> tuple[str, int]:
        while self.pos < len(self.raw):
            line = self.raw[self.pos].strip()
            self.pos += 1
            if line:
                return line, self.pos
        raise ParseError(f"unexpected end of file, expected {what}")

    def expect_end(self) -> None:
        while self.pos < len(self.raw):
            if self.raw[self.pos].strip():
                raise ParseError("unexpected trailing content", self.pos + 1)
            self.pos += 1

    def rest_tokens(self) -> list[tuple[str, int]]:
        toks = []
        while self.pos < len(self.raw):
            for tok in _TOKEN_RE.findall(self.raw[self.pos]):
                toks.append((tok, self.pos + 1))
            self.pos += 1
        return toks


class _Tokens:
    def __init__(self, pairs: list[tuple[str, int]]):
        self.pairs = pairs
        self.pos = 0

    def done(self) -> bool:
        return self.pos >= len(self.pairs)

    @property
    def line(self) -> int | None:
        if self.pos < len(self.pairs):
            return self.pairs[self.pos][1]
        return self.pairs[-1][1] if self.pairs else None

    def next(self, what: str = "token") -> tuple[str, int]:
        if self.done():
            raise ParseError(f"unexpected end of file, expected {what}", self.line)
        pair = self.pairs[self.pos]
        self.pos += 1
        return pair

    def peek(self) -> str | None:
        return None if self.done() else self.pairs[self.pos][0]

    def expect(self, token: str) -> int:
        tok, line = self.next(repr(token))
        if tok != token:
            raise ParseError(f"expected {token!r}, found {tok!r}", line)
        return line

    def expect_end(self) -> None:
        if not self.done():
            tok, line = self.pairs[self.pos]
            raise ParseError(f"unexpected trailing content {tok!r}", line)


def _parse_header(lines: _Lines, tag: str) -> Schema:
    got, lineno = lines.next("format tag")
    if got != tag:
        raise ParseError(f"expected format tag {tag!r}, found {got!r}", lineno)
    n_line, lineno = lines.next("variable count")
    n = _int(n_line, lineno, "variable count")
    if n < 1:
        raise ParseError("variable count must be positive", lineno)
    cards_line, lineno = lines.next("cardinalities")
    toks = cards_line.split()
    if len(toks) != n:
        raise ParseError(f"expected {n} cardinalities, found {len(toks)}", lineno)
    cards = [_int(t, lineno, "cardinality") for t in toks]
    if any(c < 2 for c in cards):
        raise ParseError("cardinalities must be at least 2", lineno)
    return Schema.of_cards(cards)


def _header(tag: str, schema: Schema) -> list[str]:
    return [tag, str(len(schema)), " ".join(str(c) for c in schema.cards)]


# ---------------------------------------------------------------------------
# Tree expressions (.bn/.dn/.mt bodies, .mn tree records)
# ---------------------------------------------------------------------------


def _parse_tree_expr(toks: _Tokens, schema: Schema, depth: int = 0):
    # depth cap keeps hostile inputs from exhausting the Python stack
    if depth > len(schema) + 8:
        raise ParseError("tree nesting exceeds the variable count", toks.line)
    toks.expect("(")
    head, lineno = toks.next("'leaf' or 'split'")
    if head == "leaf":
        vals = []
        while toks.peek() not in (")", None):
            tok, line = toks.next("leaf value")
            vals.append(_to_log(_float(tok, line), line))
        toks.expect(")")
        if not vals:
            raise ParseError("leaf needs at least one value", lineno)
        return Leaf(np.asarray(vals[0]) if len(vals) == 1 else np.asarray(vals))
    if head == "split":
        tok, line = toks.next("split variable")
        var = _int(tok, line, "variable index")
        if not 0 <= var < len(schema):
            raise ParseError(f"variable {var} out of range", line)
        children = []
        while toks.peek() == "(":
            children.append(_parse_tree_expr(toks, schema, depth + 1))
        toks.expect(")")
        if len(children) != schema.cards[var]:
            raise ParseError(
                f"split on variable {var} needs {schema.cards[var]} subtrees", line
            )
        return Split(var, tuple(children))
    raise ParseError(f"expected 'leaf' or 'split', found {head!r}", lineno)


def _leaf_arity(node) -> int:
    if isinstance(node, Leaf):
        return 1 if node.values.ndim == 0 else int(node.values.shape[0])
    return _leaf_arity(node.children[0])


def _expr_of_tree(node) -> str:
    if isinstance(node, Leaf):
        vals = np.atleast_1d(node.values)
        return "(leaf " + " ".join(_lin(v) for v in vals) + ")"
    return (
        f"(split {node.var} " + " ".join(_expr_of_tree(c) for c in node.children) + ")"
    )


def _normalize_leaf_shapes(node, arity: int):
    """Unify parsed leaves: arity 1 stays scalar, otherwise vectors."""
    if isinstance(node, Leaf):
        got = 1 if node.values.ndim == 0 else node.values.shape[0]
        if got != arity:
            raise ParseError(f"leaves disagree on arity ({got} vs {arity})")
        if arity == 1 and node.values.ndim != 0:
            return weight_leaf(float(node.values[0]))
        return node
    return Split(node.var, tuple(_normalize_leaf_shapes(c, arity) for c in node.children))


def _tree_from_table_cpd(table: TableFactor, target: int, schema: Schema):
    parents = [v for v in table.scope if v != target]
    arr = table.reshaped()

    def build(prefix: dict[int, int], remaining: list[int]):
        if not remaining:
            sel = tuple(
                prefix[v] if v != target else slice(None) for v in table.scope
            )
            return dist_leaf(np.asarray(arr[sel]).reshape(schema.cards[target]))
        v = remaining[0]
        children = []
        for x in range(schema.cards[v]):
            children.append(build({**prefix, v: x}, remaining[1:]))
        return Split(v, tuple(children))

    return build({}, parents)


def _cpd_records(schema: Schema, toks: _Tokens) -> list[TreeFactor]:
    cpds = []
    for v in range(len(schema)):
        line = toks.expect("cpd")
        tok, line = toks.next("variable index")
        idx = _int(tok, line, "variable index")
        if idx != v:
            raise ParseError(f"expected cpd {v}, found cpd {idx}", line)
        root = _parse_tree_expr(toks, schema)
        arity = _leaf_arity(root)
        if arity != schema.cards[v]:
            raise ParseError(
                f"cpd {v} leaves hold {arity} values, expected {schema.cards[v]}", line
            )
        root = _normalize_leaf_shapes(root, arity)
        try:
            cpds.append(tree_factor(root, schema, target=v))
        except ValidationError as exc:
            raise ParseError(f"cpd {v}: {exc}", line) from None
    return cpds


def _cpd_lines(model) -> list[str]:
    lines = []
    schema = model.schema
    for v, cpd in enumerate(model.cpds):
        if isinstance(cpd, TableFactor):
            root = _tree_from_table_cpd(cpd, v, schema)
        else:
            root = cpd.root
        lines.append(f"cpd {v}")
        lines.append(_expr_of_tree(root))
    return lines


def _parse_bn_like(text: str, tag: str):
    lines = _Lines(text)
    schema = _parse_header(lines, tag)
    toks = _Tokens(lines.rest_tokens())
    cpds = _cpd_records(schema, toks)
    toks.expect_end()
    model = (
        BayesNet(schema, tuple(cpds)) if tag == "BN" else DependencyNet(schema, tuple(cpds))
    )
    problems = validate(model)
    if problems:
        raise ValidationError(problems)
    return model


def _serialize_bn_like(model, tag: str) -> str:
    return "\n".join(_header(tag, model.schema) + _cpd_lines(model)) + "\n"


# ---------------------------------------------------------------------------
# Markov networks
# ---------------------------------------------------------------------------

_LIT_RE = re.compile(r"^v(\d+)(!=|=)(\d+)$")


def _parse_feature_line(line: str, lineno: int, schema: Schema) -> ConjunctiveFeature:
    toks = line.split()
    weight = _to_log(_float(toks[0], lineno), lineno)
    lits = []
    for tok in toks[1:]:
        m = _LIT_RE.match(tok)
        if not m:
            raise ParseError(f"malformed literal {tok!r}", lineno)
        var, op, val = int(m.group(1)), m.group(2), int(m.group(3))
        if not 0 <= var < len(schema):
            raise ParseError(f"literal variable {var} out of range", lineno)
        if not 0 <= val < schema.cards[var]:
            raise ParseError(f"literal value {val} out of range", lineno)
        lits.append(Literal(var, val, negated=(op == "!=")))
    try:
        return conjunctive_feature(lits, weight, schema)
    except ValidationError as exc:
        raise ParseError(str(exc), lineno) from None


def _feature_line(f: ConjunctiveFeature) -> str:
    parts = [_lin(f.log_weight)]
    for lit in f.literals:
        op = "!=" if lit.negated else "="
        parts.append(f"v{lit.var}{op}{lit.value}")
    return " ".join(parts)


def _parse_table_record(toks: _Tokens, schema: Schema) -> TableFactor:
    entries = []
    while toks.peek() not in (")", None):
        entries.append(toks.next("table entry"))
    line = toks.expect(")")
    total = len(entries)
    for k in range(total + 1):
        size = 1
        ok = True
        scope = []
        for tok, tline in entries[:k]:
            try:
                v = int(tok)
            except ValueError:
                ok = False
                break
            if not 0 <= v < len(schema) or v in scope:
                ok = False
                break
            scope.append(v)
            size *= schema.cards[v]
        if not ok:
            break
        if size == total - k:
            vals = [_to_log(_float(t, ln), ln) for t, ln in entries[k:]]
            scope_t = tuple(scope)
            cards = tuple(schema.cards[v] for v in scope_t)
            if any(a >= b for a, b in zip(scope_t, scope_t[1:])):
                raise ParseError(f"table scope {scope_t} must be ascending", line)
            return TableFactor(scope_t, cards, np.asarray(vals))
    raise ParseError("table record does not match any scope/value split", line)


def _parse_tree_record(toks: _Tokens, schema: Schema) -> TreeFactor:
    scope = []
    while toks.peek() not in ("(", None):
        tok, line = toks.next("scope variable")
        v = _int(tok, line, "variable index")
        if not 0 <= v < len(schema):
            raise ParseError(f"variable {v} out of range", line)
        scope.append(v)
    root = _parse_tree_expr(toks, schema)
    line = toks.expect(")")
    arity = _leaf_arity(root)
    root = _normalize_leaf_shapes(root, arity)
    target = None
    if arity > 1:
        if not scope:
            raise ParseError("distribution tree needs its target first in scope", line)
        target = scope[0]
        if schema.cards[target] != arity:
            raise ParseError(
                f"leaves hold {arity} values but target {target} has "
                f"cardinality {schema.cards[target]}",
                line,
            )
    try:
        factor = tree_factor(root, schema, target=target)
    except ValidationError as exc:
        raise ParseError(str(exc), line) from None
    if sorted(scope) != list(factor.scope):
        raise ParseError(
            f"declared scope {scope} does not match tree scope {list(factor.scope)}", line
        )
    return factor


def _tree_record(f: TreeFactor) -> str:
    if f.target is None:
        scope = list(f.scope)
    else:
        scope = [f.target] + [v for v in f.scope if v != f.target]
    return (
        "(tree " + " ".join(str(v) for v in scope) + " " + _expr_of_tree(f.root) + ")"
    )


def _parse_mn(text: str) -> MarkovNet:
    lines = _Lines(text)
    schema = _parse_header(lines, "MN")
    head, lineno = lines.next("features count")
    toks = head.split()
    if len(toks) != 2 or toks[0] != "features":
        raise ParseError(f"expected 'features <m>', found {head!r}", lineno)
    m = _int(toks[1], lineno, "feature count")
    potentials: list = []
    for _ in range(m):
        line, lineno = lines.next("feature line")
        potentials.append(_parse_feature_line(line, lineno, schema))
    toks = _Tokens(lines.rest_tokens())
    while not toks.done():
        line = toks.expect("(")
        head, lineno = toks.next("'table' or 'tree'")
        if head == "table":
            potentials.append(_parse_table_record(toks, schema))
        elif head == "tree":
            potentials.append(_parse_tree_record(toks, schema))
        else:
            raise ParseError(f"expected 'table' or 'tree', found {head!r}", lineno)
    model = MarkovNet(schema, tuple(potentials))
    problems = validate(model)
    if problems:
        raise ValidationError(problems)
    return model


def _serialize_mn(mn: MarkovNet) -> str:
    features = [f for f in mn.potentials if isinstance(f, ConjunctiveFeature)]
    others = [f for f in mn.potentials if not isinstance(f, ConjunctiveFeature)]
    lines = _header("MN", mn.schema)
    lines.append(f"features {len(features)}")
    lines.extend(_feature_line(f) for f in features)
    for f in others:
        if isinstance(f, TableFactor):
            parts = ["(table"] + [str(v) for v in f.scope]
            parts += [_lin(x) for x in f.log_values]
            lines.append(" ".join(parts) + ")")
        else:
            lines.append(_tree_record(f))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Circuits and sum-product networks
# ---------------------------------------------------------------------------


def _parse_circuit_like(text: str, tag: str):
    lines = _Lines(text)
    schema = _parse_header(lines, tag)
    head, lineno = lines.next("node count")
    toks = head.split()
    if len(toks) != 2 or toks[0] != "nodes":
        raise ParseError(f"expected 'nodes <k>', found {head!r}", lineno)
    count = _int(toks[1], lineno, "node count")
    nodes: list = []
    for i in range(count):
        line, lineno = lines.next(f"node {i}")
        toks = line.split()
        kind = toks[0]

        def child(tok: str) -> int:
            c = _int(tok, lineno, "child index")
            if not 0 <= c < i:
                raise ParseError(f"child {c} must refer to an earlier node", lineno)
            return c

        if kind == "v":
            if len(toks) != 3:
                raise ParseError("indicator lines are 'v <var> <val>'", lineno)
            var = _int(toks[1], lineno, "variable index")
            val = _int(toks[2], lineno, "value index")
            if not 0 <= var < len(schema) or not 0 <= val < schema.cards[var]:
                raise ParseError(f"indicator ({var},{val}) out of range", lineno)
            nodes.append(
                Indicator(var, val) if tag == "AC" else IndicatorLeaf(var, val)
            )
        elif kind == "c":
            if tag != "AC":
                raise ParseError("constants are only valid in circuits", lineno)
            if len(toks) != 2:
                raise ParseError("constant lines are 'c <value>'", lineno)
            nodes.append(Constant(_to_log(_float(toks[1], lineno), lineno)))
        elif kind == "*":
            k = _int(toks[1], lineno, "child count") if len(toks) > 1 else 0
            if len(toks) != 2 + k or k < 1:
                raise ParseError(f"expected {k} children on product line", lineno)
            children = tuple(child(t) for t in toks[2:])
            nodes.append(Product(children) if tag == "AC" else SpnProduct(children))
        elif kind == "+":
            k = _int(toks[1], lineno, "child count") if len(toks) > 1 else 0
            if k < 1:
                raise ParseError("sums need at least one child", lineno)
            if tag == "AC":
                if len(toks) != 2 + k:
                    raise ParseError(f"expected {k} children on sum line", lineno)
                nodes.append(Sum(tuple(child(t) for t in toks[2:])))
            else:
                if len(toks) != 2 + 2 * k:
                    raise ParseError(
                        f"expected {k} weight/child pairs on sum line", lineno
                    )
                weights = []
                children = []
                for j in range(k):
                    weights.append(
                        _to_log(_float(toks[2 + 2 * j], lineno), lineno)
                    )
                    children.append(child(toks[3 + 2 * j]))
                nodes.append(WeightedSum(tuple(children), tuple(weights)))
        else:
            raise ParseError(f"unknown node kind {kind!r}", lineno)
    lines.expect_end()
    if tag == "AC":
        model = ArithmeticCircuit(schema, tuple(nodes))
        problems = validate_circuit(model)
    else:
        model = SumProductNetwork(schema, tuple(nodes))
        problems = validate_spn(model)
    if problems:
        raise ValidationError(problems)
    return model


def _serialize_circuit_like(model, tag: str) -> str:
    lines = _header(tag, model.schema)
    lines.append(f"nodes {len(model.nodes)}")
    for nd in model.nodes:
        if isinstance(nd, (Indicator, IndicatorLeaf)):
            lines.append(f"v {nd.var} {nd.val}")
        elif isinstance(nd, Constant):
            lines.append(f"c {_lin(nd.log_value)}")
        elif isinstance(nd, (Product, SpnProduct)):
            lines.append(
                f"* {len(nd.children)} " + " ".join(str(c) for c in nd.children)
            )
        elif isinstance(nd, Sum):
            lines.append(
                f"+ {len(nd.children)} " + " ".join(str(c) for c in nd.children)
            )
        else:
            pairs = " ".join(
                f"{_lin(w)} {c}" for c, w in zip(nd.children, nd.log_weights)
            )
            lines.append(f"+ {len(nd.children)} {pairs}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Mixtures of trees
# ---------------------------------------------------------------------------


def _parse_mt(text: str) -> MixtureOfTrees:
    lines = _Lines(text)
    schema = _parse_header(lines, "MT")
    head, lineno = lines.next("component count")
    toks = head.split()
    if len(toks) != 2 or toks[0] != "components":
        raise ParseError(f"expected 'components <k>', found {head!r}", lineno)
    k = _int(toks[1], lineno, "component count")
    if k < 1:
        raise ParseError("mixtures need at least one component", lineno)
    weights = []
    components = []
    body = _Tokens(lines.rest_tokens())
    for _ in range(k):
        body.expect("component")
        tok, lineno = body.next("component weight")
        weights.append(_to_log(_float(tok, lineno), lineno))
        cpds = _cpd_records(schema, body)
        components.append(BayesNet(schema, tuple(cpds)))
    body.expect_end()
    model = MixtureOfTrees(schema, np.asarray(weights), tuple(components))
    problems = validate(model)
    if problems:
        raise ValidationError(problems)
    return model


def _serialize_mt(mt: MixtureOfTrees) -> str:
    lines = _header("MT", mt.schema)
    lines.append(f"components {len(mt.components)}")
    for w, comp in zip(mt.log_mix_weights, mt.components):
        lines.append(f"component {_lin(float(w))}")
        lines.extend(_cpd_lines(comp))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# UAI interchange
# ---------------------------------------------------------------------------


def _parse_uai(text: str):
    pairs = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        for tok in raw.split():
            pairs.append((tok, lineno))
    toks = _Tokens(pairs)
    preamble, lineno = toks.next("MARKOV or BAYES")
    if preamble not in ("MARKOV", "BAYES"):
        raise ParseError(f"expected MARKOV or BAYES, found {preamble!r}", lineno)
    tok, lineno = toks.next("variable count")
    n = _int(tok, lineno, "variable count")
    if n < 1:
        raise ParseError("variable count must be positive", lineno)
    cards = []
    for _ in range(n):
        tok, lineno = toks.next("cardinality")
        c = _int(tok, lineno, "cardinality")
        if c < 2:
            raise ParseError("cardinalities must be at least 2", lineno)
        cards.append(c)
    schema = Schema.of_cards(cards)
    tok, lineno = toks.next("factor count")
    nfac = _int(tok, lineno, "factor count")
    scopes = []
    for _ in range(nfac):
        tok, lineno = toks.next("scope size")
        k = _int(tok, lineno, "scope size")
        scope = []
        for _ in range(k):
            tok, lineno = toks.next("scope variable")
            v = _int(tok, lineno, "variable index")
            if not 0 <= v < n:
                raise ParseError(f"variable {v} out of range", lineno)
            if v in scope:
                raise ParseError(f"variable {v} repeated in scope", lineno)
            scope.append(v)
        scopes.append(scope)
    factors = []
    for scope in scopes:
        size = 1
        for v in scope:
            size *= cards[v]
        tok, lineno = toks.next("value count")
        declared = _int(tok, lineno, "value count")
        if declared != size:
            raise ParseError(f"expected {size} values, found {declared}", lineno)
        vals = np.empty(size)
        for i in range(size):
            tok, lineno = toks.next("table value")
            vals[i] = _to_log(_float(tok, lineno), lineno)
        order = np.argsort(scope, kind="stable")
        arr = vals.reshape([cards[v] for v in scope]).transpose(order)
        sorted_scope = tuple(sorted(scope))
        factors.append(
            (
                scope,
                TableFactor(
                    sorted_scope,
                    tuple(cards[v] for v in sorted_scope),
                    arr.ravel(),
                ),
            )
        )
    toks.expect_end()
    if preamble == "MARKOV":
        model = MarkovNet(schema, tuple(f for _, f in factors))
    else:
        if len(factors) != n:
            raise ParseError("BAYES networks need one table per variable")
        cpds: list = [None] * n
        for file_scope, table in factors:
            target = file_scope[-1]
            if cpds[target] is not None:
                raise ParseError(f"variable {target} has two tables")
            cpds[target] = table
        model = BayesNet(schema, tuple(cpds))
    problems = validate(model)
    if problems:
        raise ValidationError(problems)
    return model


def _uai_table_lines(scope: list[int], table: TableFactor) -> list[str]:
    order = [table.scope.index(v) for v in scope]
    arr = table.reshaped().transpose(order)
    flat = arr.ravel()
    return [str(flat.shape[0]), " ".join(_lin(x) for x in flat)]


def _serialize_uai(model: Union[BayesNet, MarkovNet]) -> str:
    schema = model.schema
    lines: list[str] = []
    warned = False
    if isinstance(model, MarkovNet):
        lines.append("MARKOV")
        tables = []
        for f in model.potentials:
            if not isinstance(f, TableFactor):
                warned = True
            tables.append(as_table(f))
        scopes = [list(t.scope) for t in tables]
    else:
        lines.append("BAYES")
        tables = []
        scopes = []
        for v, cpd in enumerate(model.cpds):
            if not isinstance(cpd, TableFactor):
                warned = True
            t = as_table(cpd)
            tables.append(t)
            scopes.append([u for u in t.scope if u != v] + [v])
    if warned:
        logger.warning("structured factors expanded to tables for UAI output")
    lines.append(str(len(schema)))
    lines.append(" ".join(str(c) for c in schema.cards))
    lines.append(str(len(tables)))
    for scope in scopes:
        lines.append(str(len(scope)) + " " + " ".join(str(v) for v in scope))
    lines.append("")
    for scope, table in zip(scopes, tables):
        lines.extend(_uai_table_lines(scope, table))
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def format_of_path(path: str | Path) -> str:
    suffix = Path(path).suffix
    if suffix not in _EXTENSIONS:
        raise InputError(f"cannot infer a model format from {str(path)!r}")
    return _EXTENSIONS[suffix]


def parse_model(text: str, fmt: str) -> Model:
    if fmt == "bn":
        return _parse_bn_like(text, "BN")
    if fmt == "dn":
        return _parse_bn_like(text, "DN")
    if fmt == "mn":
        return _parse_mn(text)
    if fmt == "ac":
        return _parse_circuit_like(text, "AC")
    if fmt == "spn":
        return _parse_circuit_like(text, "SPN")
    if fmt == "mt":
        return _parse_mt(text)
    if fmt == "uai":
        return _parse_uai(text)
    raise InputError(f"unknown model format {fmt!r}")


_FORMAT_TYPES = {
    "bn": BayesNet,
    "dn": DependencyNet,
    "mn": MarkovNet,
    "ac": ArithmeticCircuit,
    "spn": SumProductNetwork,
    "mt": MixtureOfTrees,
    "uai": (BayesNet, MarkovNet),
}


def serialize_model(model: Model, fmt: str) -> str:
    expected = _FORMAT_TYPES.get(fmt)
    if expected is None:
        raise InputError(f"unknown model format {fmt!r}")
    if not isinstance(model, expected):
        raise UnsupportedConversionError(
            f"cannot write a {type(model).__name__} as {fmt!r}"
        )
    if fmt == "bn":
        return _serialize_bn_like(model, "BN")
    if fmt == "dn":
        return _serialize_bn_like(model, "DN")
    if fmt == "mn":
        return _serialize_mn(model)
    if fmt == "ac":
        return _serialize_circuit_like(model, "AC")
    if fmt == "spn":
        return _serialize_circuit_like(model, "SPN")
    if fmt == "mt":
        return _serialize_mt(model)
    return _serialize_uai(model)


def load_model(path: str | Path, fmt: str | None = None) -> Model:
    path = Path(path)
    fmt = fmt or format_of_path(path)
    return parse_model(path.read_text(), fmt)


def save_model(model: Model, path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or format_of_path(path)
    path.write_text(serialize_model(model, fmt))


_CONVERSIONS = (
    "bn->bn", "mn->mn", "dn->dn", "ac->ac", "spn->spn", "mt->mt", "uai->uai",
    "bn->mn", "bn->uai", "mn->uai", "uai->mn",
)


def mconvert(
    in_path: str | Path,
    out_path: str | Path,
    informat: str | None = None,
    outformat: str | None = None,
) -> None:
    """Convert between model formats; see _CONVERSIONS for supported pairs.

    Structured factors are expanded to tables where the target format
    needs them, with a warning on the diagnostic channel.  Circuits and
    sum-product networks are produced by the compile commands, not here.
    """
    src = informat or format_of_path(in_path)
    dst = outformat or format_of_path(out_path)
    pair = f"{src}->{dst}"
    if pair not in _CONVERSIONS:
        raise UnsupportedConversionError(
            f"unsupported conversion {pair}; supported: {', '.join(_CONVERSIONS)}"
        )
    model = load_model(in_path, src)
    if pair == "bn->mn":
        model = bn_to_mn(model)
    elif pair == "uai->mn" and isinstance(model, BayesNet):
        model = bn_to_mn(model)
    save_model(model, out_path, dst)
