"""Command-line behavior: exit codes, output contracts, determinism."""

import math
from pathlib import Path

import numpy as np
import pytest

from pgmkit.cli import main
from pgmkit.formats import load_model

REPO = Path(__file__).parent.parent
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture()
def train(tmp_path):
    rng = np.random.default_rng(0)
    n = 150
    a = rng.integers(0, 2, n)
    b = (a ^ (rng.random(n) < 0.2)).astype(int)
    c = rng.integers(0, 2, n)
    rows = np.stack([a, b, c], axis=1)
    path = tmp_path / "train.data"
    path.write_text("".join(",".join(map(str, r)) + "\n" for r in rows))
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestExitCodes:
    def test_unknown_command(self, capsys):
        assert run("definitely-not-a-command") == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_command_lists_all(self, capsys):
        assert run() == 1
        err = capsys.readouterr().err
        for name in ("acbn", "acquery", "bp", "mconvert", "bench"):
            assert name in err

    def test_missing_file_is_input_error(self, capsys):
        assert run("acquery", "-m", "no-such-file.ac") == 2

    def test_parse_error_is_input_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.bn"
        bad.write_text("BN\n1\n2\ncpd 0\n(leaf oops)\n")
        assert run("acve", "-m", bad, "-o", tmp_path / "o.ac") == 2

    def test_runtime_failure_is_exit_three(self, tmp_path, capsys):
        ev = tmp_path / "z.ev"
        ev.write_text("1,*\n")
        det = GOLDEN / "deterministic.bn"
        ac = tmp_path / "det.ac"
        assert run("acve", "-m", det, "-o", ac) == 0
        bad_ev = tmp_path / "bad.ev"
        bad_ev.write_text("0,1\n")  # impossible under the deterministic CPD
        assert run("acquery", "-m", ac, "-ev", bad_ev, "-marg") == 3

    def test_missing_required_flag(self, capsys):
        assert run("cl") == 1

    def test_help_exits_zero(self, capsys):
        assert run("-h") == 0
        assert "COMMAND" in capsys.readouterr().out

    def test_wrong_model_type_for_query(self, capsys):
        assert run("acquery", "-m", GOLDEN / "categorical.spn") == 1
        assert run("spnquery", "-m", GOLDEN / "uniform1.bn") == 1
        assert run("mtquery", "-m", GOLDEN / "categorical.ac") == 1


class TestLearnAndQuery:
    def test_acbn_writes_both_artifacts(self, train, tmp_path, capsys):
        bn = tmp_path / "m.bn"
        ac = tmp_path / "m.ac"
        assert run("acbn", "-i", train, "-mo", bn, "-o", ac) == 0
        assert bn.exists() and ac.exists()
        out = capsys.readouterr()
        assert out.out == ""  # results went to files

    def test_acquery_marginal_block_format(self, train, tmp_path, capsys):
        ac = tmp_path / "m.ac"
        assert run("acbn", "-i", train, "-o", ac) == 0
        ev = tmp_path / "q.ev"
        ev.write_text("*,1,*\n*,*,0\n")
        assert run("acquery", "-m", ac, "-ev", ev, "-marg") == 0
        out = capsys.readouterr().out
        blocks = out.strip().split("\n\n")
        assert len(blocks) == 2
        for block in blocks:
            lines = block.split("\n")
            assert len(lines) == 3
            for v, line in enumerate(lines):
                parts = line.split()
                assert parts[0] == f"v{v}"
                probs = [float(x) for x in parts[1:]]
                assert sum(probs) == pytest.approx(1.0, abs=1e-9)

    def test_acquery_logprob_and_query(self, train, tmp_path, capsys):
        ac = tmp_path / "m.ac"
        run("acbn", "-i", train, "-o", ac)
        ev = tmp_path / "e.ev"
        ev.write_text("*,1,*\n")
        q = tmp_path / "q.q"
        q.write_text("0,*,*\n")
        assert run("acquery", "-m", ac, "-ev", ev) == 0
        lp_ev = float(capsys.readouterr().out.strip())
        assert run("acquery", "-m", ac, "-ev", ev, "-q", q) == 0
        lp_cond = float(capsys.readouterr().out.strip())
        assert run("acquery", "-m", ac) == 0
        total = float(capsys.readouterr().out.strip())
        assert total == pytest.approx(0.0, abs=1e-9)
        assert lp_cond <= 1e-9
        assert lp_ev < 0

    def test_acquery_mpe(self, train, tmp_path, capsys):
        ac = tmp_path / "m.ac"
        run("acbn", "-i", train, "-o", ac)
        assert run("acquery", "-m", ac, "-mpe") == 0
        line = capsys.readouterr().out.strip()
        state, score = line.split()
        assert len(state.split(",")) == 3
        assert float(score) < 0

    def test_mscore_uniform_model(self, tmp_path, capsys):
        data = tmp_path / "d.data"
        data.write_text("0,1,0\n1,1,1\n")
        bn = tmp_path / "u.bn"
        bn.write_text(
            "BN\n3\n2 2 2\n"
            "cpd 0\n(leaf 0.5 0.5)\ncpd 1\n(leaf 0.5 0.5)\ncpd 2\n(leaf 0.5 0.5)\n"
        )
        assert run("mscore", "-m", bn, "-i", data) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 3
        for line in lines[:2]:
            assert float(line) == pytest.approx(3 * math.log(0.5), abs=1e-12)
        assert lines[2].startswith("avg ")

    def test_mscore_same_model_through_bn_and_ac(self, train, tmp_path, capsys):
        bn = tmp_path / "m.bn"
        ac = tmp_path / "m.ac"
        run("acbn", "-i", train, "-mo", bn, "-o", ac)
        assert run("mscore", "-m", bn, "-i", train) == 0
        bn_out = capsys.readouterr().out.strip().split("\n")
        assert run("mscore", "-m", ac, "-i", train) == 0
        ac_out = capsys.readouterr().out.strip().split("\n")
        for a, b in zip(bn_out, ac_out):
            va = float(a.split()[-1]) if a.startswith("avg") else float(a)
            vb = float(b.split()[-1]) if b.startswith("avg") else float(b)
            assert va == pytest.approx(vb, abs=1e-9)

    def test_mscore_empty_dataset(self, tmp_path, capsys):
        data = tmp_path / "d.data"
        data.write_text("\n")
        bn = GOLDEN / "uniform1.bn"
        assert run("mscore", "-m", bn, "-i", data) == 0
        assert capsys.readouterr().out == "avg n/a\n"

    def test_all_learners_produce_loadable_models(self, train, tmp_path):
        jobs = [
            ("cl", "bn"),
            ("bnlearn", "bn"),
            ("dnlearn", "dn"),
            ("mtlearn", "mt"),
            ("spnlearn", "spn"),
        ]
        for cmd, ext in jobs:
            out = tmp_path / f"m_{cmd}.{ext}"
            assert run(cmd, "-i", train, "-mo", out) == 0, cmd
            load_model(out)

    def test_queries_on_all_tractable_models(self, train, tmp_path, capsys):
        spn = tmp_path / "m.spn"
        mt = tmp_path / "m.mt"
        run("spnlearn", "-i", train, "-mo", spn)
        run("mtlearn", "-i", train, "-mo", mt, "-k", "2")
        for cmd, model in (("spnquery", spn), ("mtquery", mt)):
            assert run(cmd, "-m", model, "-marg") == 0, cmd
            out = capsys.readouterr().out
            assert out.startswith("v0 ")

    def test_mscore_covers_every_model_kind(self, train, tmp_path, capsys):
        models = []
        for cmd, ext in (("dnlearn", "dn"), ("mtlearn", "mt"), ("spnlearn", "spn")):
            out = tmp_path / f"score.{ext}"
            assert run(cmd, "-i", train, "-mo", out) == 0
            models.append(out)
        models.append(GOLDEN / "mixed.mn")
        for model in models:
            assert run("mscore", "-m", model, "-i", train) == 0, model
            lines = capsys.readouterr().out.strip().split("\n")
            assert lines[-1].startswith("avg ")
            float(lines[-1].split()[1])

    def test_acve_with_explicit_order(self, train, tmp_path, capsys):
        bn = tmp_path / "m.bn"
        run("cl", "-i", train, "-mo", bn)
        a = tmp_path / "a.ac"
        b = tmp_path / "b.ac"
        assert run("acve", "-m", bn, "-o", a, "-order", "2,0,1") == 0
        assert run("acve", "-m", bn, "-o", b, "-heur", "min-fill") == 0
        assert run("acve", "-m", bn, "-o", a, "-order", "0,0,1") == 1
        for path in (a, b):
            assert run("mscore", "-m", path, "-i", train) == 0
            capsys.readouterr()

    def test_mtquery_conditional_queries(self, train, tmp_path, capsys):
        mt = tmp_path / "m.mt"
        run("mtlearn", "-i", train, "-mo", mt, "-k", "2")
        ev = tmp_path / "e.ev"
        ev.write_text("*,1,*\n")
        q = tmp_path / "q.q"
        q.write_text("1,*,*\n")
        assert run("mtquery", "-m", mt, "-ev", ev, "-q", q) == 0
        val = float(capsys.readouterr().out.strip())
        assert val <= 1e-9

    def test_version_flag(self, capsys):
        assert run("--version") == 0
        assert "pgmkit" in capsys.readouterr().out

    def test_mnlearnw_and_acml(self, train, tmp_path):
        mn_structure = tmp_path / "s.mn"
        mn_structure.write_text(
            "MN\n3\n2 2 2\nfeatures 3\n1.0 v0=1 v1=1\n1.0 v1=1 v2=1\n1.0 v0=1\n"
        )
        out_mn = tmp_path / "w.mn"
        assert run("mnlearnw", "-m", mn_structure, "-i", train, "-o", out_mn) == 0
        load_model(out_mn)
        ac = tmp_path / "m.ac"
        run("acbn", "-i", train, "-o", ac)
        out_ac = tmp_path / "t.ac"
        assert run("acml", "-m", ac, "-i", train, "-o", out_ac, "-maxiters", "20") == 0
        load_model(out_ac)


class TestInferenceCommands:
    def test_bp_gibbs_mf_agree_on_easy_model(self, train, tmp_path, capsys):
        bn = tmp_path / "m.bn"
        run("cl", "-i", train, "-mo", bn)
        outputs = {}
        for cmd, extra in (
            ("bp", []),
            ("gibbs", ["-samples", "30000", "-burn", "500"]),
            ("mf", []),
        ):
            assert run(cmd, "-m", bn, *extra) == 0, cmd
            outputs[cmd] = capsys.readouterr().out
        bp_marg = [
            [float(x) for x in line.split()[1:]]
            for line in outputs["bp"].strip().split("\n")
        ]
        gibbs_marg = [
            [float(x) for x in line.split()[1:]]
            for line in outputs["gibbs"].strip().split("\n")
        ]
        for a, b in zip(bp_marg, gibbs_marg):
            assert np.allclose(a, b, atol=0.02)

    def test_icm_and_maxprod_output_assignments(self, train, tmp_path, capsys):
        bn = tmp_path / "m.bn"
        run("cl", "-i", train, "-mo", bn)
        for cmd in ("icm", "maxprod"):
            assert run(cmd, "-m", bn) == 0
            line = capsys.readouterr().out.strip()
            state, score = line.split()
            assert len(state.split(",")) == 3
            float(score)

    def test_uai_evidence_accepted(self, train, tmp_path, capsys):
        bn = tmp_path / "m.bn"
        run("cl", "-i", train, "-mo", bn)
        evid = tmp_path / "case.evid"
        evid.write_text("1 0 1\n")
        assert run("bp", "-m", bn, "-ev", evid) == 0
        first = capsys.readouterr().out.split("\n")[0]
        assert first == "v0 0.0 1.0"


class TestDeterminism:
    def test_seeded_runs_are_byte_identical(self, train, tmp_path):
        outs = []
        for tag in ("a", "b"):
            spn = tmp_path / f"{tag}.spn"
            assert run("spnlearn", "-i", train, "-mo", spn, "-seed", "7") == 0
            outs.append(spn.read_text())
        assert outs[0] == outs[1]

    def test_gibbs_output_deterministic(self, train, tmp_path, capsys):
        bn = tmp_path / "m.bn"
        run("cl", "-i", train, "-mo", bn)
        results = []
        for _ in range(2):
            o = tmp_path / "out.txt"
            assert (
                run("gibbs", "-m", bn, "-samples", "2000", "-burn", "100",
                    "-seed", "3", "-o", o)
                == 0
            )
            results.append(o.read_text())
        assert results[0] == results[1]


class TestTraceAndConvert:
    def test_log_flag_writes_trace(self, train, tmp_path):
        bn = tmp_path / "m.bn"
        trace = tmp_path / "trace.csv"
        assert run("bnlearn", "-i", train, "-mo", bn, "-log", trace) == 0
        lines = trace.read_text().strip().split("\n")
        assert lines[0] == "step,label,value"
        assert len(lines) >= 2

    def test_mconvert_cli(self, tmp_path):
        out = tmp_path / "o.uai"
        assert run("mconvert", "-m", GOLDEN / "chow_liu3.bn", "-o", out) == 0
        assert out.read_text().startswith("BAYES")
        assert run("mconvert", "-m", GOLDEN / "mixed.mn", "-o", tmp_path / "o.bn") == 2


class TestBench:
    def test_small_grid_report(self, tmp_path, capsys):
        csv = tmp_path / "bench.csv"
        assert (
            run("bench", "2", "2", "-samples", "2000", "-burn", "200", "-o", csv) == 0
        )
        table = capsys.readouterr().out
        assert table.startswith("algorithm")
        lines = csv.read_text().strip().split("\n")
        assert lines[0] == "algorithm,rows,cols,seed,setting,converged,l1_error,wall_ms"
        for line in lines[1:]:
            fields = line.split(",")
            assert fields[0] in ("bp", "gibbs")
            assert float(fields[6]) < 0.05  # enumeration accuracy on 2x2

    def test_reports_identical_up_to_timing(self, tmp_path):
        def strip_time(text):
            return [",".join(l.split(",")[:-1]) for l in text.strip().split("\n")]

        runs = []
        for tag in ("a", "b"):
            csv = tmp_path / f"{tag}.csv"
            assert (
                run("bench", "2", "3", "-samples", "1000", "-burn", "100",
                    "-seed", "5", "-o", csv)
                == 0
            )
            runs.append(strip_time(csv.read_text()))
        assert runs[0] == runs[1]

    def test_rejects_degenerate_grid(self, capsys):
        assert run("bench", "1", "5") == 1
