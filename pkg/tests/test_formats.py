"""Format round-trips, golden-corpus pinning, error reporting, fuzzing."""

import math
from pathlib import Path

import numpy as np
import pytest

from pgmkit.core import UNKNOWN, Schema
from pgmkit.errors import (
    InputError,
    ParseError,
    ToolkitError,
    UnsupportedConversionError,
    ValidationError,
)
from pgmkit.factors import TableFactor, as_table, factor_log_value
from pgmkit.formats import (
    dump_dataset,
    dump_evidence,
    format_of_path,
    load_dataset,
    load_evidence,
    load_model,
    load_uai_evidence,
    mconvert,
    parse_model,
    save_model,
    serialize_model,
)
from pgmkit.models import BayesNet, MarkovNet

from support import joint_log_table

GOLDEN = Path(__file__).parent / "golden"

MODEL_FILES = sorted(
    p for p in GOLDEN.iterdir() if p.suffix in (".bn", ".mn", ".dn", ".ac", ".spn", ".uai", ".mt")
)


class TestDataset:
    def test_basic_parse(self):
        data = load_dataset("0,1\n1,1\n")
        assert data.rows.tolist() == [[0, 1], [1, 1]]
        assert data.schema.cards == (2, 2)

    def test_cardinality_inference_floors_at_two(self):
        data = load_dataset("0,3\n0,1\n")
        assert data.schema.cards == (2, 4)

    def test_round_trip(self):
        text = "0,1,2\n1,0,0\n0,2,1\n"
        assert dump_dataset(load_dataset(text)) == text

    def test_star_rejected_in_data(self):
        with pytest.raises(ParseError) as err:
            load_dataset("0,*\n")
        assert err.value.line == 1

    def test_ragged_rows_rejected(self):
        with pytest.raises(ParseError) as err:
            load_dataset("0,1\n1\n")
        assert err.value.line == 2

    def test_value_beyond_cardinality_rejected(self):
        with pytest.raises(ParseError) as err:
            load_dataset("0,1\n0,5\n", Schema.of_cards([2, 2]))
        assert err.value.line == 2

    def test_non_integer_token_rejected(self):
        with pytest.raises(ParseError):
            load_dataset("0,x\n")


class TestEvidence:
    def test_star_means_unknown(self):
        ev = load_evidence("*,1,*\n", Schema.of_cards([2, 2, 2]))
        assert ev[0].tolist() == [UNKNOWN, 1, UNKNOWN]

    def test_round_trip(self):
        schema = Schema.of_cards([2, 3])
        text = "*,2\n1,*\n*,*\n"
        assert dump_evidence(load_evidence(text, schema)) == text

    def test_uai_evidence(self):
        schema = Schema.of_cards([2, 2, 3])
        cases = load_uai_evidence("1 2 2\n0\n", schema)
        assert cases[0].tolist() == [UNKNOWN, UNKNOWN, 2]
        assert cases[1].tolist() == [UNKNOWN, UNKNOWN, UNKNOWN]

    def test_uai_evidence_errors(self):
        schema = Schema.of_cards([2, 2])
        with pytest.raises(ParseError):
            load_uai_evidence("2 0 1\n", schema)
        with pytest.raises(ParseError):
            load_uai_evidence("1 5 0\n", schema)


class TestGoldenCorpus:
    def test_corpus_is_large_enough(self):
        by_fmt = {}
        for p in MODEL_FILES:
            by_fmt.setdefault(p.suffix, []).append(p)
        for fmt in (".bn", ".mn", ".dn", ".ac", ".spn", ".uai"):
            assert by_fmt.get(fmt), f"no golden files for {fmt}"
        assert len(MODEL_FILES) >= 30

    @pytest.mark.parametrize("path", MODEL_FILES, ids=lambda p: p.name)
    def test_serialize_parse_is_the_identity_on_files(self, path):
        fmt = format_of_path(path)
        text = path.read_text()
        model = parse_model(text, fmt)
        assert serialize_model(model, fmt) == text

    @pytest.mark.parametrize("path", MODEL_FILES, ids=lambda p: p.name)
    def test_parse_serialize_parse_is_stable(self, path):
        fmt = format_of_path(path)
        model = parse_model(path.read_text(), fmt)
        again = parse_model(serialize_model(model, fmt), fmt)
        assert serialize_model(again, fmt) == serialize_model(model, fmt)

    def test_log_values_survive_decimal_round_trip(self):
        for path in MODEL_FILES:
            if path.suffix != ".mn":
                continue
            model = parse_model(path.read_text(), "mn")
            again = parse_model(serialize_model(model, "mn"), "mn")
            for f, g in zip(model.potentials, again.potentials):
                if isinstance(f, TableFactor):
                    finite = np.isfinite(f.log_values)
                    assert np.allclose(
                        f.log_values[finite], g.log_values[finite], atol=1e-12
                    )


class TestModelGrammars:
    def test_smallest_uai_instance(self):
        text = "MARKOV\n2\n2 2\n1\n2 0 1\n\n4\n1 2 3 4\n"
        model = parse_model(text, "uai")
        assert isinstance(model, MarkovNet)
        (factor,) = model.potentials
        expected = {(0, 0): 1.0, (0, 1): 2.0, (1, 0): 3.0, (1, 1): 4.0}
        for state, want in expected.items():
            assert math.exp(factor_log_value(factor, state)) == pytest.approx(want)

    def test_single_variable_bn(self):
        text = "BN\n1\n2\ncpd 0\n(leaf 0.5 0.5)\n"
        model = parse_model(text, "bn")
        assert isinstance(model, BayesNet)
        assert math.exp(factor_log_value(model.cpds[0], (0,))) == pytest.approx(0.5)

    def test_bn_records_must_be_in_order(self):
        text = "BN\n2\n2 2\ncpd 1\n(leaf 0.5 0.5)\ncpd 0\n(leaf 0.5 0.5)\n"
        with pytest.raises(ParseError):
            parse_model(text, "bn")

    def test_trailing_content_rejected(self):
        text = "BN\n1\n2\ncpd 0\n(leaf 0.5 0.5)\nextra\n"
        with pytest.raises(ParseError):
            parse_model(text, "bn")

    def test_uai_trailing_tokens_rejected(self):
        text = "MARKOV\n2\n2 2\n1\n2 0 1\n\n4\n1 2 3 4 9\n"
        with pytest.raises(ParseError):
            parse_model(text, "uai")

    def test_validation_reported_distinct_from_syntax(self):
        bad_norm = "BN\n1\n2\ncpd 0\n(leaf 0.5 0.4)\n"
        with pytest.raises(ValidationError):
            parse_model(bad_norm, "bn")
        bad_syntax = "BN\n1\n2\ncpd 0\n(leaf 0.5 0.5\n"
        with pytest.raises(ParseError):
            parse_model(bad_syntax, "bn")

    def test_ac_children_must_precede(self):
        text = "AC\n1\n2\nnodes 2\n* 1 1\nv 0 0\n"
        with pytest.raises(ParseError):
            parse_model(text, "ac")

    def test_duplicate_indicator_is_a_validation_error(self):
        text = "AC\n1\n2\nnodes 3\nv 0 0\nv 0 0\n+ 2 0 1\n"
        with pytest.raises(ValidationError):
            parse_model(text, "ac")

    def test_spn_weights_must_normalize(self):
        text = "SPN\n1\n2\nnodes 3\nv 0 0\nv 0 1\n+ 2 0.5 0 0.4 1\n"
        with pytest.raises(ValidationError):
            parse_model(text, "spn")

    def test_mn_table_scope_resolution(self):
        text = "MN\n2\n2 2\nfeatures 0\n(table 0 1 1.0 2.0 3.0 4.0)\n"
        model = parse_model(text, "mn")
        (factor,) = model.potentials
        assert factor.scope == (0, 1)
        assert math.exp(factor_log_value(factor, (1, 0))) == pytest.approx(3.0)

    def test_mn_feature_round_trip_with_negation(self):
        text = "MN\n2\n2 2\nfeatures 1\n2.0 v0=1 v1!=0\n"
        model = parse_model(text, "mn")
        f = model.potentials[0]
        assert factor_log_value(f, (1, 1)) == pytest.approx(math.log(2.0))
        assert factor_log_value(f, (1, 0)) == 0.0
        assert serialize_model(model, "mn") == text


class TestUaiScopePermutation:
    def test_bayes_child_with_higher_parent_round_trips(self):
        from pgmkit.factors import Split, dist_leaf, tree_factor

        schema = Schema.of_cards([2, 2])
        child_first = BayesNet(
            schema,
            (
                tree_factor(
                    Split(1, (dist_leaf(np.log([0.9, 0.1])), dist_leaf(np.log([0.4, 0.6])))),
                    schema,
                    target=0,
                ),
                tree_factor(dist_leaf(np.log([0.3, 0.7])), schema, target=1),
            ),
        )
        text = serialize_model(child_first, "uai")
        lines = text.split("\n")
        assert lines[4] == "2 1 0"  # parent listed first, child last
        back = parse_model(text, "uai")
        assert isinstance(back, BayesNet)
        assert np.allclose(
            joint_log_table(child_first), joint_log_table(back), atol=1e-12
        )

    def test_markov_scope_order_normalized(self):
        text = "MARKOV\n2\n2 3\n1\n2 1 0\n\n6\n1 2 3 4 5 6\n"
        model = parse_model(text, "uai")
        (factor,) = model.potentials
        assert factor.scope == (0, 1)
        # file order was (v1, v0) with v0 fastest: value at v1=2, v0=1 is 6
        assert math.exp(factor_log_value(factor, (1, 2))) == pytest.approx(6.0)


class TestMconvert(object):
    def test_bn_to_uai_preserves_joint(self, tmp_path):
        src = GOLDEN / "ternary_chain.bn"
        out = tmp_path / "out.uai"
        mconvert(src, out)
        bn = load_model(src)
        mn = load_model(out)
        assert np.allclose(joint_log_table(bn), joint_log_table(mn), atol=1e-9)

    def test_tree_cpds_expand_like_their_tables(self, tmp_path):
        src = GOLDEN / "treecpd4.bn"
        out = tmp_path / "out.uai"
        mconvert(src, out)
        bn = load_model(src)
        uai = load_model(out)
        for v, cpd in enumerate(bn.cpds):
            dense = as_table(cpd)
            got = uai.cpds[v]
            assert got.scope == dense.scope
            assert np.allclose(
                np.exp(got.log_values), np.exp(dense.log_values), atol=1e-12
            )

    def test_canonicalization_is_idempotent(self, tmp_path):
        src = GOLDEN / "mixed.mn"
        once = tmp_path / "a.mn"
        twice = tmp_path / "b.mn"
        mconvert(src, once)
        mconvert(once, twice)
        assert once.read_text() == twice.read_text()

    def test_bn_to_mn(self, tmp_path):
        src = GOLDEN / "chow_liu3.bn"
        out = tmp_path / "out.mn"
        mconvert(src, out)
        bn = load_model(src)
        mn = load_model(out)
        assert np.allclose(joint_log_table(bn), joint_log_table(mn), atol=1e-9)

    def test_uai_to_mn(self, tmp_path):
        out = tmp_path / "out.mn"
        mconvert(GOLDEN / "bayes.uai", out)
        mn = load_model(out)
        assert isinstance(mn, MarkovNet)
        bayes = load_model(GOLDEN / "bayes.uai")
        assert np.allclose(joint_log_table(bayes), joint_log_table(mn), atol=1e-9)

    def test_unsupported_pair_lists_supported(self, tmp_path):
        with pytest.raises(UnsupportedConversionError) as err:
            mconvert(GOLDEN / "mixed.mn", tmp_path / "out.bn")
        assert "supported" in str(err.value)

    def test_lossy_expansion_warns(self, tmp_path, caplog):
        import logging

        with caplog.at_level(logging.WARNING, logger="pgmkit"):
            mconvert(GOLDEN / "treecpd4.bn", tmp_path / "o.uai")
        assert any("expanded" in message for message in caplog.messages)


class TestFuzzing:
    """Mutated golden files must fail cleanly or remain valid, never crash."""

    @staticmethod
    def mutate(text: str, rng) -> str:
        raw = list(text)
        kind = rng.integers(4)
        if kind == 0 and raw:
            i = int(rng.integers(len(raw)))
            raw[i] = chr(int(rng.integers(32, 127)))
        elif kind == 1 and raw:
            i = int(rng.integers(len(raw)))
            del raw[i : i + int(rng.integers(1, 9))]
        elif kind == 2:
            i = int(rng.integers(len(raw) + 1))
            token = rng.choice([" 9", " x", "(", ")", " -1", "\n0", " 1e400"])
            raw[i:i] = list(token)
        else:
            lines = text.split("\n")
            if len(lines) > 2:
                j = int(rng.integers(1, len(lines)))
                del lines[j]
                return "\n".join(lines)
        return "".join(raw)

    def test_mutations_never_crash(self):
        rng = np.random.default_rng(12345)
        structured = 0
        accepted = 0
        rounds = 1000  # the acceptance suite runs the full 10000
        texts = [(format_of_path(p), p.read_text()) for p in MODEL_FILES]
        for i in range(rounds):
            fmt, text = texts[int(rng.integers(len(texts)))]
            mutated = self.mutate(text, rng)
            try:
                parse_model(mutated, fmt)
                accepted += 1
            except (ParseError, ValidationError, InputError):
                structured += 1
            except ToolkitError as exc:  # pragma: no cover - would be a bug
                pytest.fail(f"unstructured toolkit error: {exc!r}")
        assert structured + accepted == rounds
        assert structured > rounds // 2


class TestGoldenDataFiles:
    def test_dataset_round_trips_byte_for_byte(self):
        text = (GOLDEN / "sample.data").read_text()
        assert dump_dataset(load_dataset(text)) == text

    def test_evidence_round_trips_byte_for_byte(self):
        text = (GOLDEN / "sample.ev").read_text()
        schema = Schema.of_cards([2, 3, 2])
        assert dump_evidence(load_evidence(text, schema)) == text

    def test_uai_evidence_file_loads(self):
        schema = Schema.of_cards([2, 3, 2])
        cases = load_uai_evidence((GOLDEN / "sample.evid").read_text(), schema)
        assert cases[0].tolist() == [-1, 1, -1]
        assert cases[1].tolist() == [0, -1, 1]
        assert cases[2].tolist() == [-1, -1, -1]


def test_format_of_path_errors():
    with pytest.raises(InputError):
        format_of_path("model.xyz")


def test_save_and_load_round_trip(tmp_path):
    model = load_model(GOLDEN / "chow_liu3.bn")
    out = tmp_path / "copy.bn"
    save_model(model, out)
    assert out.read_text() == (GOLDEN / "chow_liu3.bn").read_text()
