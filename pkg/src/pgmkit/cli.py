"""Subcommand command-line interface.

One executable, many subcommands, shared flags: -i data, -m model in,
-mo model out, -o output, -ev evidence, -q queries, -seed, -log tracefile,
-v verbosity.  Results go to the -o file or standard output; diagnostics
go to standard error and never interleave with results.  Exit codes:
0 success, 1 usage error, 2 input or parse error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import (
    acve_compile,
    elimination_order,
    evaluate,
    marginals as ac_marginals,
    mpe as ac_mpe,
    mt_log_prob,
    mt_map,
    mt_marginals,
)
from .core import LOG_ZERO, UNKNOWN, Dataset, Schema, empty_evidence
from .diagnostics import AuditTrace, Timer, seeded_rng
from .errors import (
    InputError,
    OptionError,
    RuntimeFailure,
    ToolkitError,
    UsageError,
)
from .circuit import ArithmeticCircuit
from .factors import TableFactor, as_table
from .formats import (
    load_dataset,
    load_evidence_path,
    load_model,
    mconvert,
    save_model,
)
from .inference import (
    InferenceOptions,
    factor_graph,
    gibbs,
    icm,
    loopy_bp,
    max_product,
    mean_field,
)
from .learn import (
    LearnOptions,
    OptimOptions,
    ac_ml_params,
    acbn,
    chow_liu,
    learn_bn_tree_cpds,
    learn_dn,
    learn_mt,
    mn_pl_weights,
)
from .models import (
    BayesNet,
    DependencyNet,
    MarkovNet,
    MixtureOfTrees,
    bn_row_log_prob,
    markov_blanket_conditional,
    mt_row_log_prob,
)
from .spn import (
    SpnLearnOptions,
    SumProductNetwork,
    learn_spn,
    spn_log_prob,
    spn_map,
    spn_marginals,
)

log = logging.getLogger("pgmkit")

_SPN_NOTE = (
    "simplified recursive learner (independence splits + row clustering with "
    "univariate leaves), not the full ID-SPN procedure"
)
_ACBN_NOTE = (
    "learns tree-CPD structure with a per-parameter penalty, then compiles; "
    "if the circuit exceeds -cap, retries with the penalty doubled (the "
    "original circuit-growth-aware scoring is not implemented)"
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise UsageError(f"{self.prog}: {message}")


def _add_common(p: _Parser, *flags: str) -> None:
    if "i" in flags:
        p.add_argument("-i", metavar="FILE", help="input data file")
    if "m" in flags:
        p.add_argument("-m", metavar="FILE", help="input model file")
    if "mo" in flags:
        p.add_argument("-mo", metavar="FILE", help="output model file")
    if "o" in flags:
        p.add_argument("-o", metavar="FILE", help="output file (default: stdout)")
    if "ev" in flags:
        p.add_argument("-ev", metavar="FILE", help="evidence file (CSV with *, or .evid)")
    if "q" in flags:
        p.add_argument("-q", metavar="FILE", help="query file (CSV with *)")
    p.add_argument("-seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("-log", metavar="FILE", help="write an audit trace as CSV")
    p.add_argument("-v", action="count", default=0, help="increase verbosity")


def _add_learn_flags(p: _Parser) -> None:
    p.add_argument("-alpha", type=float, default=1.0, help="add-alpha smoothing (default 1.0)")
    p.add_argument("-kappa", type=float, default=1.0, help="penalty per parameter (default 1.0)")
    p.add_argument("-maxpar", type=int, default=None, help="max parents per variable")
    p.add_argument("-maxleaves", type=int, default=None, help="max leaves per tree")


def _add_infer_flags(p: _Parser) -> None:
    p.add_argument("-iters", type=int, default=50, help="max iterations (default 50)")
    p.add_argument("-thresh", type=float, default=1e-6, help="convergence threshold")
    p.add_argument("-damp", type=float, default=0.0, help="message damping in [0,1)")
    p.add_argument("-burn", type=int, default=1000, help="burn-in sweeps (default 1000)")
    p.add_argument("-samples", type=int, default=10000, help="recorded sweeps (default 10000)")
    p.add_argument("-init", choices=("uniform", "random"), default="uniform")


def _add_optim_flags(p: _Parser) -> None:
    p.add_argument("-l2", type=float, default=0.0, help="l2 penalty (default 0)")
    p.add_argument("-step", type=float, default=1.0, help="initial step size")
    p.add_argument("-maxiters", type=int, default=200, help="max ascent iterations")
    p.add_argument("-tol", type=float, default=1e-6, help="gradient tolerance")


def build_parser() -> _Parser:
    parser = _Parser(prog="pgmkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"pgmkit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def cmd(name: str, help_: str, flags: str = "", learn=False, infer=False, optim=False):
        p = sub.add_parser(name, help=help_, description=help_)
        _add_common(p, *flags.split())
        if learn:
            _add_learn_flags(p)
        if infer:
            _add_infer_flags(p)
        if optim:
            _add_optim_flags(p)
        return p

    p = cmd("cl", "learn a Chow-Liu tree Bayes net", "i mo")
    p.add_argument("-alpha", type=float, default=1.0)
    p = cmd("mtlearn", "learn a mixture of trees by EM", "i mo")
    p.add_argument("-alpha", type=float, default=1.0)
    p.add_argument("-k", type=int, default=2, help="mixture components (default 2)")
    p.add_argument("-emiters", type=int, default=30)
    p.add_argument("-emthresh", type=float, default=1e-4)
    cmd("bnlearn", "learn a Bayes net with tree conditionals", "i mo", learn=True)
    cmd("dnlearn", "learn a dependency network with tree conditionals", "i mo", learn=True)
    p = cmd("acbn", f"learn a tractable Bayes net plus circuit: {_ACBN_NOTE}", "i mo o", learn=True)
    p.add_argument("-cap", type=int, default=100000, help="circuit node budget")
    p = cmd("acve", "compile a model into an arithmetic circuit", "m o")
    p.add_argument("-heur", choices=("min-degree", "min-fill"), default="min-degree")
    p.add_argument("-order", help="comma-separated elimination order")
    cmd("acml", "fit circuit constants by maximum likelihood", "m i o", optim=True)
    cmd("mnlearnw", "fit Markov net weights by pseudo-likelihood", "m i o", optim=True)
    p = cmd("spnlearn", f"learn a sum-product network: {_SPN_NOTE}", "i mo")
    p.add_argument("-alpha", type=float, default=1.0)
    p.add_argument("-minrows", type=int, default=50, help="min rows before factorizing")
    p.add_argument("-ithresh", type=float, default=0.01, help="independence threshold (nats)")
    p.add_argument("-clusters", type=int, default=2, help="row clusters per sum")
    for name, help_ in (
        ("acquery", "query an arithmetic circuit"),
        ("spnquery", "query a sum-product network"),
        ("mtquery", "query a mixture of trees"),
    ):
        p = cmd(name, help_, "m ev q o")
        p.add_argument("-marg", action="store_true", help="output conditional marginals")
        p.add_argument("-mpe", action="store_true", help="output the most probable state")
    cmd("gibbs", "Gibbs-sampling marginals", "m ev o", infer=True)
    cmd("bp", "loopy belief propagation marginals", "m ev o", infer=True)
    cmd("mf", "mean-field marginals", "m ev o", infer=True)
    cmd("icm", "iterated conditional modes", "m ev o", infer=True)
    cmd("maxprod", "max-product decoding", "m ev o", infer=True)
    p = cmd("mconvert", "convert between model formats", "m o")
    p.add_argument("-informat", choices=("bn", "mn", "dn", "ac", "spn", "uai", "mt"))
    p.add_argument("-outformat", choices=("bn", "mn", "dn", "ac", "spn", "uai", "mt"))
    cmd("mscore", "per-row and mean log score of data under a model", "m i o")
    p = cmd("bench", "benchmark inference on a random grid Markov net", "o", infer=True)
    p.add_argument("rows", type=int)
    p.add_argument("cols", type=int)
    p.add_argument("-coupling", type=float, default=1.0, help="pairwise strength")
    p.add_argument("-ctype", choices=("attractive", "mixed"), default="attractive")
    p.add_argument("-algs", default="bp,gibbs", help="comma list: bp,gibbs,mf,icm")
    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _require(args, name: str) -> str:
    value = getattr(args, name.lstrip("-").replace("-", "_"), None)
    if not value:
        raise UsageError(f"{args.command}: flag -{name.lstrip('-')} is required")
    return value


def _emit(args, text: str) -> None:
    if getattr(args, "o", None):
        Path(args.o).write_text(text)
    else:
        sys.stdout.write(text)


def _write_trace(args, trace: AuditTrace) -> None:
    if getattr(args, "log", None):
        Path(args.log).write_text(trace.to_csv())


def _load_data(args, schema: Schema | None = None) -> Dataset:
    path = _require(args, "i")
    return load_dataset(Path(path).read_text(), schema)


def _evidence_cases(args, schema: Schema) -> list[np.ndarray]:
    if getattr(args, "ev", None):
        cases = load_evidence_path(args.ev, schema)
        if not cases:
            raise InputError(f"evidence file {args.ev!r} is empty")
        return cases
    return [empty_evidence(schema)]


def _marginal_blocks(reports: list[list[np.ndarray]]) -> str:
    blocks = []
    for margs in reports:
        lines = [
            f"v{v} " + " ".join(repr(float(p)) for p in dist)
            for v, dist in enumerate(margs)
        ]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _assignment_lines(results) -> str:
    lines = []
    for assign, score in results:
        lines.append(
            ",".join(str(int(x)) for x in assign) + " " + repr(float(score))
        )
    return "\n".join(lines) + "\n"


def _learn_options(args) -> LearnOptions:
    return LearnOptions(
        alpha=getattr(args, "alpha", 1.0),
        kappa=getattr(args, "kappa", 1.0),
        k=getattr(args, "k", 2),
        em_iters=getattr(args, "emiters", 30),
        em_threshold=getattr(args, "emthresh", 1e-4),
        seed=args.seed,
        max_parents=getattr(args, "maxpar", None),
        max_leaves=getattr(args, "maxleaves", None),
        circuit_cap=getattr(args, "cap", 100000),
    )


def _infer_options(args) -> InferenceOptions:
    return InferenceOptions(
        max_iters=getattr(args, "iters", 50),
        threshold=getattr(args, "thresh", 1e-6),
        damping=getattr(args, "damp", 0.0),
        burn_in=getattr(args, "burn", 1000),
        samples=getattr(args, "samples", 10000),
        seed=args.seed,
        init=getattr(args, "init", "uniform"),
    )


def _optim_options(args) -> OptimOptions:
    return OptimOptions(
        l2=args.l2, step=args.step, max_iters=args.maxiters, tol=args.tol
    )


def _load_graph_model(args):
    model = load_model(_require(args, "m"))
    if not isinstance(model, (BayesNet, MarkovNet, DependencyNet)):
        raise OptionError(
            f"{args.command} needs a Bayes, Markov, or dependency network"
        )
    return model


# ---------------------------------------------------------------------------
# Command handlers
# ---------------------------------------------------------------------------


def _run_cl(args) -> None:
    data = _load_data(args)
    bn = chow_liu(data, LearnOptions(alpha=args.alpha))
    save_model(bn, _require(args, "mo"), "bn")


def _run_mtlearn(args) -> None:
    data = _load_data(args)
    trace = AuditTrace()
    opts = LearnOptions(
        alpha=args.alpha, k=args.k, em_iters=args.emiters,
        em_threshold=args.emthresh, seed=args.seed,
    )
    mt = learn_mt(data, opts, audit=trace)
    save_model(mt, _require(args, "mo"), "mt")
    _write_trace(args, trace)


def _run_bnlearn(args) -> None:
    data = _load_data(args)
    trace = AuditTrace()
    bn = learn_bn_tree_cpds(data, _learn_options(args), audit=trace)
    save_model(bn, _require(args, "mo"), "bn")
    _write_trace(args, trace)


def _run_dnlearn(args) -> None:
    data = _load_data(args)
    trace = AuditTrace()
    dn = learn_dn(data, _learn_options(args), audit=trace)
    save_model(dn, _require(args, "mo"), "dn")
    _write_trace(args, trace)


def _run_acbn(args) -> None:
    data = _load_data(args)
    if not args.mo and not args.o:
        raise UsageError("acbn: need -mo (Bayes net) and/or -o (circuit)")
    trace = AuditTrace()
    bn, ac = acbn(data, _learn_options(args), audit=trace)
    if args.mo:
        save_model(bn, args.mo, "bn")
    if args.o:
        save_model(ac, args.o, "ac")
    _write_trace(args, trace)


def _run_acve(args) -> None:
    model = load_model(_require(args, "m"))
    if not isinstance(model, (BayesNet, MarkovNet)):
        raise OptionError("acve compiles Bayes or Markov networks")
    order = None
    if args.order:
        order = [int(tok) for tok in args.order.split(",")]
        order = elimination_order(model, given=order)
    ac = acve_compile(model, order=order, heuristic=args.heur)
    save_model(ac, _require(args, "o"), "ac")


def _run_acml(args) -> None:
    model = load_model(_require(args, "m"))
    if not isinstance(model, ArithmeticCircuit):
        raise OptionError("acml needs an arithmetic circuit")
    data = _load_data(args, model.schema)
    trace = AuditTrace()
    trained = ac_ml_params(model, data, _optim_options(args), audit=trace)
    save_model(trained, _require(args, "o"), "ac")
    _write_trace(args, trace)


def _run_mnlearnw(args) -> None:
    model = load_model(_require(args, "m"))
    if not isinstance(model, MarkovNet):
        raise OptionError("mnlearnw needs a Markov network structure")
    data = _load_data(args, model.schema)
    trace = AuditTrace()
    trained = mn_pl_weights(model, data, _optim_options(args), audit=trace)
    save_model(trained, _require(args, "o"), "mn")
    _write_trace(args, trace)


def _run_spnlearn(args) -> None:
    data = _load_data(args)
    opts = SpnLearnOptions(
        min_rows=args.minrows,
        independence_threshold=args.ithresh,
        sum_clusters=args.clusters,
        alpha=args.alpha,
        seed=args.seed,
    )
    spn = learn_spn(data, opts)
    save_model(spn, _require(args, "mo"), "spn")


def _query_command(args, kind, log_prob, margs, map_) -> None:
    model = load_model(_require(args, "m"))
    if not isinstance(model, kind):
        raise OptionError(
            f"{args.command} needs a {kind.__name__}, got {type(model).__name__}"
        )
    cases = _evidence_cases(args, model.schema)
    if args.marg and args.mpe:
        raise UsageError("choose one of -marg or -mpe")
    if args.marg:
        _emit(args, _marginal_blocks([margs(model, ev) for ev in cases]))
        return
    if args.mpe:
        results = []
        for ev in cases:
            res = map_(model, ev)
            if not res.exact:
                log.warning("map decode is approximate for this model")
            results.append((res.assignment, res.log_score))
        _emit(args, _assignment_lines(results))
        return
    if getattr(args, "q", None):
        queries = load_evidence_path(args.q, model.schema)
        if len(cases) == 1 and len(queries) > 1 and not getattr(args, "ev", None):
            cases = cases * len(queries)
        if len(queries) != len(cases):
            raise InputError("query and evidence files must pair line by line")
        lines = []
        for q, ev in zip(queries, cases):
            joint = ev.copy()
            for v, x in enumerate(q):
                if x != UNKNOWN:
                    if joint[v] != UNKNOWN and joint[v] != x:
                        raise InputError("query contradicts evidence")
                    joint[v] = x
            lines.append(repr(log_prob(model, joint) - log_prob(model, ev)))
        _emit(args, "\n".join(lines) + "\n")
        return
    _emit(args, "\n".join(repr(log_prob(model, ev)) for ev in cases) + "\n")


def _run_acquery(args) -> None:
    _query_command(
        args,
        ArithmeticCircuit,
        lambda m, ev: evaluate(m, ev),
        lambda m, ev: ac_marginals(m, ev),
        lambda m, ev: ac_mpe(m, ev),
    )


def _run_spnquery(args) -> None:
    _query_command(
        args,
        SumProductNetwork,
        lambda m, ev: spn_log_prob(m, ev),
        lambda m, ev: spn_marginals(m, ev),
        lambda m, ev: spn_map(m, ev),
    )


def _run_mtquery(args) -> None:
    _query_command(
        args,
        MixtureOfTrees,
        lambda m, ev: mt_log_prob(m, ev),
        lambda m, ev: mt_marginals(m, ev),
        lambda m, ev: mt_map(m, ev),
    )


def _marginal_command(args, runner) -> None:
    model = _load_graph_model(args)
    opts = _infer_options(args)
    cases = _evidence_cases(args, model.schema)
    reports = []
    trace = AuditTrace()
    for ev in cases:
        report = runner(model, ev, opts)
        if not report.converged:
            log.warning("did not converge within %d iterations", opts.max_iters)
        reports.append(report.marginals)
        for _, lab, val in report.trace.events:
            trace.record(lab, val)
    _emit(args, _marginal_blocks(reports))
    _write_trace(args, trace)


def _run_gibbs(args) -> None:
    _marginal_command(args, lambda m, ev, o: gibbs(m, ev, o))


def _run_bp(args) -> None:
    def run(model, ev, opts):
        return loopy_bp(factor_graph(model), ev, opts)

    _marginal_command(args, run)


def _run_mf(args) -> None:
    _marginal_command(args, lambda m, ev, o: mean_field(m, ev, o))


def _run_icm(args) -> None:
    model = _load_graph_model(args)
    opts = _infer_options(args)
    results = []
    for ev in _evidence_cases(args, model.schema):
        res = icm(model, ev, opts)
        results.append((res.assignment, res.log_score))
    _emit(args, _assignment_lines(results))


def _run_maxprod(args) -> None:
    model = _load_graph_model(args)
    fg = factor_graph(model)
    opts = _infer_options(args)
    results = []
    for ev in _evidence_cases(args, model.schema):
        res = max_product(fg, ev, opts)
        if not res.converged:
            log.warning("max-product did not converge; best decode returned")
        results.append((res.assignment, res.log_score))
    _emit(args, _assignment_lines(results))


def _run_mconvert(args) -> None:
    mconvert(
        _require(args, "m"), _require(args, "o"),
        informat=args.informat, outformat=args.outformat,
    )


def _row_scorer(model):
    if isinstance(model, BayesNet):
        return lambda row: bn_row_log_prob(model, row)
    if isinstance(model, MixtureOfTrees):
        return lambda row: mt_row_log_prob(model, row)
    if isinstance(model, (MarkovNet, DependencyNet)):
        def pll_row(row):
            total = 0.0
            for v in range(len(model.schema)):
                p = markov_blanket_conditional(model, v, row)[int(row[v])]
                total += math.log(p) if p > 0 else LOG_ZERO
            return total

        return pll_row
    if isinstance(model, SumProductNetwork):
        return lambda row: spn_log_prob(model, row)
    base = evaluate(model)
    return lambda row: evaluate(model, row) - base


def _run_mscore(args) -> None:
    model = load_model(_require(args, "m"))
    data = _load_data(args, model.schema)
    scorer = _row_scorer(model)
    scores = [scorer(data.rows[i]) for i in range(data.n_rows)]
    lines = [repr(float(s)) for s in scores]
    if scores:
        lines.append(f"avg {repr(float(np.mean(scores)))}")
    else:
        lines.append("avg n/a")
    _emit(args, "\n".join(lines) + "\n")


def _grid_mn(rows: int, cols: int, coupling: float, ctype: str, seed: int) -> MarkovNet:
    schema = Schema.of_cards([2] * (rows * cols))
    rng = seeded_rng(seed).stream("bench")
    potentials = []
    for v in range(rows * cols):
        potentials.append(
            TableFactor((v,), (2,), rng.uniform(-0.5, 0.5, size=2))
        )
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            edges = []
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
            for u in edges:
                w = coupling * rng.uniform(0.5, 1.0)
                if ctype == "mixed" and rng.random() < 0.5:
                    w = -w
                potentials.append(
                    TableFactor(u, (2, 2), np.array([w, 0.0, 0.0, w]))
                )
    return MarkovNet(schema, tuple(potentials))


def _enum_marginals(mn: MarkovNet) -> list[np.ndarray]:
    cards = mn.schema.cards
    joint = np.zeros(cards)
    for f in mn.potentials:
        arr = as_table(f).reshaped()
        joint = joint + arr.reshape(
            [cards[v] if v in f.scope else 1 for v in range(len(cards))]
        )
    joint = np.exp(joint - joint.max())
    joint /= joint.sum()
    out = []
    for v in range(len(cards)):
        axes = tuple(u for u in range(len(cards)) if u != v)
        out.append(joint.sum(axis=axes))
    return out


def _run_bench(args) -> None:
    if args.rows < 2 or args.cols < 2:
        raise UsageError("bench: rows and cols must be at least 2")
    mn = _grid_mn(args.rows, args.cols, args.coupling, args.ctype, args.seed)
    fg = factor_graph(mn)
    n_vars = args.rows * args.cols
    exact = _enum_marginals(mn) if n_vars <= 12 else None
    opts = _infer_options(args)
    algs = [a.strip() for a in args.algs.split(",") if a.strip()]
    rows_out = []
    for alg in algs:
        with Timer() as timer:
            if alg == "bp":
                report = loopy_bp(fg, None, opts)
                setting = f"iters={opts.max_iters}"
                margs, converged = report.marginals, report.converged
            elif alg == "gibbs":
                report = gibbs(mn, None, opts)
                setting = f"samples={opts.samples}"
                margs, converged = report.marginals, report.converged
            elif alg == "mf":
                report = mean_field(mn, None, opts)
                setting = f"iters={opts.max_iters}"
                margs, converged = report.marginals, report.converged
            elif alg == "icm":
                res = icm(mn, None, opts)
                setting = f"iters={opts.max_iters}"
                margs, converged = None, res.converged
            else:
                raise UsageError(f"bench: unknown algorithm {alg!r}")
        if exact is not None and margs is not None:
            l1 = max(
                float(np.abs(m - e).sum()) for m, e in zip(margs, exact)
            )
            l1_text = repr(l1)
        else:
            l1_text = "n/a"
        rows_out.append(
            (alg, str(n_vars), setting, str(converged), l1_text, f"{timer.ms:.1f}")
        )
    header = ("algorithm", "vars", "setting", "converged", "l1_error", "wall_ms")
    widths = [
        max(len(header[i]), *(len(r[i]) for r in rows_out)) for i in range(len(header))
    ]
    table_lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for r in rows_out:
        table_lines.append("  ".join(x.ljust(w) for x, w in zip(r, widths)))
    sys.stdout.write("\n".join(table_lines) + "\n")
    csv_lines = ["algorithm,rows,cols,seed,setting,converged,l1_error,wall_ms"]
    for r in rows_out:
        csv_lines.append(
            f"{r[0]},{args.rows},{args.cols},{args.seed},{r[2]},{r[3]},{r[4]},{r[5]}"
        )
    csv_text = "\n".join(csv_lines) + "\n"
    if args.o:
        Path(args.o).write_text(csv_text)
    else:
        sys.stdout.write("\n" + csv_text)


_HANDLERS = {
    "cl": _run_cl,
    "mtlearn": _run_mtlearn,
    "bnlearn": _run_bnlearn,
    "dnlearn": _run_dnlearn,
    "acbn": _run_acbn,
    "acve": _run_acve,
    "acml": _run_acml,
    "mnlearnw": _run_mnlearnw,
    "spnlearn": _run_spnlearn,
    "acquery": _run_acquery,
    "spnquery": _run_spnquery,
    "mtquery": _run_mtquery,
    "gibbs": _run_gibbs,
    "bp": _run_bp,
    "mf": _run_mf,
    "icm": _run_icm,
    "maxprod": _run_maxprod,
    "mconvert": _run_mconvert,
    "mscore": _run_mscore,
    "bench": _run_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        level = logging.WARNING - 10 * min(args.v if hasattr(args, "v") else 0, 2)
        logging.basicConfig(stream=sys.stderr, level=level, format="%(message)s")
        if not args.command:
            raise UsageError(
                "missing command; available: " + ", ".join(sorted(_HANDLERS))
            )
        _HANDLERS[args.command](args)
        return 0
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, OptionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("run 'pgmkit -h' for usage", file=sys.stderr)
        return 1
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeFailure, ToolkitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def console() -> None:
    sys.exit(main(sys.argv[1:]))
