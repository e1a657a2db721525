"""Model scoring and conversion checks against joint enumeration."""

import math

import numpy as np
import pytest

from pgmkit.core import Dataset, Schema
from pgmkit.factors import Split, TableFactor, TreeFactor, dist_leaf, tree_factor
from pgmkit.models import (
    BayesNet,
    DependencyNet,
    MarkovNet,
    MixtureOfTrees,
    bn_row_log_prob,
    bn_to_mn,
    log_likelihood,
    markov_blanket_conditional,
    pseudo_log_likelihood,
    validate,
)

from support import (
    joint_log_table,
    random_bn,
    random_dataset,
    random_mn,
)


def uniform_bn(n=3):
    schema = Schema.of_cards([2] * n)
    cpds = tuple(
        tree_factor(dist_leaf(np.log([0.5, 0.5])), schema, target=v) for v in range(n)
    )
    return BayesNet(schema, cpds)


class TestLogLikelihood:
    def test_independent_uniform_analytic(self):
        bn = uniform_bn(3)
        data = random_dataset(np.random.default_rng(0), bn.schema, 17)
        assert log_likelihood(bn, data) == pytest.approx(17 * 3 * math.log(0.5))

    def test_single_component_mixture_matches_bn(self):
        rng = np.random.default_rng(1)
        bn = random_bn(rng, [2, 2, 3], max_parents=1)
        mt = MixtureOfTrees(bn.schema, np.array([0.0]), (bn,))
        data = random_dataset(rng, bn.schema, 25)
        assert log_likelihood(mt, data) == pytest.approx(log_likelihood(bn, data))

    def test_row_probability_matches_enumeration(self):
        rng = np.random.default_rng(2)
        bn = random_bn(rng, [2, 3, 2, 2])
        joint = joint_log_table(bn)
        data = random_dataset(rng, bn.schema, 20)
        for row in data.rows:
            assert bn_row_log_prob(bn, row) == pytest.approx(
                float(joint[tuple(row)]), abs=1e-9
            )

    def test_joint_normalizes(self):
        rng = np.random.default_rng(3)
        for seed in range(5):
            bn = random_bn(np.random.default_rng(seed), [2, 2, 3])
            total = float(np.exp(joint_log_table(bn)).sum())
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_mixture_invariant_to_component_permutation(self):
        rng = np.random.default_rng(4)
        comps = tuple(random_bn(np.random.default_rng(s), [2, 2], max_parents=1) for s in range(3))
        w = np.log([0.2, 0.5, 0.3])
        data = random_dataset(rng, comps[0].schema, 30)
        a = log_likelihood(MixtureOfTrees(comps[0].schema, w, comps), data)
        perm = MixtureOfTrees(comps[0].schema, w[[2, 0, 1]], (comps[2], comps[0], comps[1]))
        assert log_likelihood(perm, data) == pytest.approx(a, abs=1e-9)


class TestPseudoLogLikelihood:
    def test_empty_markov_net_is_uniform(self):
        schema = Schema.of_cards([2, 2, 2])
        mn = MarkovNet(schema, ())
        data = random_dataset(np.random.default_rng(5), schema, 9)
        assert pseudo_log_likelihood(mn, data) == pytest.approx(9 * 3 * math.log(0.5))

    def test_dn_with_root_conditionals(self):
        schema = Schema.of_cards([2, 3])
        cpds = (
            tree_factor(dist_leaf(np.log([0.25, 0.75])), schema, target=0),
            tree_factor(dist_leaf(np.log([0.2, 0.3, 0.5])), schema, target=1),
        )
        dn = DependencyNet(schema, cpds)
        data = Dataset(schema, np.array([[0, 2], [1, 1]]))
        expected = math.log(0.25) + math.log(0.5) + math.log(0.75) + math.log(0.3)
        assert pseudo_log_likelihood(dn, data) == pytest.approx(expected, abs=1e-12)

    def test_mn_conditionals_match_enumeration(self):
        rng = np.random.default_rng(6)
        mn = random_mn(rng, [2, 2, 3], n_potentials=4)
        joint = joint_log_table(mn)
        p = np.exp(joint - joint.max())
        data = random_dataset(rng, mn.schema, 8)
        for row in data.rows:
            for v in range(3):
                sel = [row[0], row[1], row[2]]
                probs = markov_blanket_conditional(mn, v, row)
                weights = []
                for x in range(mn.schema.cards[v]):
                    sel[v] = x
                    weights.append(p[tuple(sel)])
                expected = np.asarray(weights) / sum(weights)
                assert np.allclose(probs, expected, atol=1e-12)


class TestMarkovBlanketConditional:
    def test_empty_blanket_returns_prior(self):
        bn = uniform_bn(2)
        probs = markov_blanket_conditional(bn, 0, np.array([0, 0]))
        assert np.allclose(probs, [0.5, 0.5])

    def test_two_state_bayes_rule(self):
        schema = Schema.of_cards([2, 2])
        prior = tree_factor(dist_leaf(np.log([0.6, 0.4])), schema, target=0)
        child = tree_factor(
            Split(0, (dist_leaf(np.log([0.9, 0.1])), dist_leaf(np.log([0.2, 0.8])))),
            schema,
            target=1,
        )
        bn = BayesNet(schema, (prior, child))
        probs = markov_blanket_conditional(bn, 0, np.array([0, 1]))
        expected0 = 0.6 * 0.1 / (0.6 * 0.1 + 0.4 * 0.8)
        assert probs[0] == pytest.approx(expected0, abs=1e-12)

    def test_random_mn_matches_full_joint(self):
        rng = np.random.default_rng(7)
        mn = random_mn(rng, [2, 2, 2, 3, 2], n_potentials=6)
        exact_joint = joint_log_table(mn)
        p = np.exp(exact_joint - exact_joint.max())
        state = np.array([1, 0, 1, 2, 0])
        for v in range(5):
            probs = markov_blanket_conditional(mn, v, state)
            sel = state.copy()
            weights = []
            for x in range(mn.schema.cards[v]):
                sel[v] = x
                weights.append(p[tuple(sel)])
            expected = np.asarray(weights) / sum(weights)
            assert np.allclose(probs, expected, atol=1e-12)


class TestBnToMn:
    def test_empty_parent_bn(self):
        bn = uniform_bn(3)
        mn = bn_to_mn(bn)
        assert len(mn.potentials) == 3
        assert all(p.scope == (v,) for v, p in enumerate(mn.potentials))

    def test_joint_equality_and_partition(self):
        for seed in range(5):
            bn = random_bn(np.random.default_rng(seed), [2, 3, 2])
            mn = bn_to_mn(bn)
            bn_joint = joint_log_table(bn)
            mn_joint = joint_log_table(mn)
            assert np.allclose(bn_joint, mn_joint, atol=1e-9)
            assert float(np.exp(mn_joint).sum()) == pytest.approx(1.0, abs=1e-9)

    def test_pll_agrees_with_bn_blanket_version(self):
        rng = np.random.default_rng(8)
        bn = random_bn(rng, [2, 2, 3, 2])
        mn = bn_to_mn(bn)
        data = random_dataset(rng, bn.schema, 12)
        direct = 0.0
        for row in data.rows:
            for v in range(4):
                probs = markov_blanket_conditional(bn, v, row)
                direct += math.log(probs[row[v]])
        assert pseudo_log_likelihood(mn, data) == pytest.approx(direct, abs=1e-9)


class TestCpdProductNormalization:
    def test_multiplying_cpds_and_summing_everything_gives_log_one(self):
        from pgmkit.factors import as_table, marginalize, multiply

        for seed in range(5):
            bn = random_bn(np.random.default_rng(seed + 50), [2, 3, 2])
            product = as_table(bn.cpds[0])
            for cpd in bn.cpds[1:]:
                product = multiply(product, as_table(cpd))
            for v in list(product.scope):
                product = marginalize(product, v, "sum")
            assert float(product.log_values[0]) == pytest.approx(0.0, abs=1e-9)


class TestValidate:
    def test_mutual_parents_are_a_cycle_violation(self):
        schema = Schema.of_cards([2, 2])
        b0 = TableFactor((0, 1), (2, 2), np.log(np.full(4, 0.5)))
        b1 = TableFactor((0, 1), (2, 2), np.log(np.full(4, 0.5)))
        bn = BayesNet(schema, (b0, b1))
        assert any("cycle" in v for v in validate(bn))

    def test_tree_splitting_on_target_is_reported(self):
        schema = Schema.of_cards([2, 2])
        half = dist_leaf(np.log([0.5, 0.5]))
        raw = TreeFactor(Split(0, (half, half)), 0, (0,), (2,))
        bn = BayesNet(schema, (raw, tree_factor(half, schema, target=1)))
        assert any("its own target" in v for v in validate(bn))

    def test_unnormalized_leaf_reported(self):
        schema = Schema.of_cards([2])
        cpd = tree_factor(dist_leaf(np.log([0.5, 0.4])), schema, target=0)
        bn = BayesNet(schema, (cpd,))
        assert any("sums to" in v for v in validate(bn))

    def test_random_valid_models_pass(self):
        for seed in range(8):
            bn = random_bn(np.random.default_rng(seed), [2, 3, 2, 2])
            assert validate(bn) == []
        for seed in range(8):
            mn = random_mn(np.random.default_rng(seed), [2, 2, 3], n_potentials=4)
            assert validate(mn) == []

    def test_mixture_weight_violation(self):
        bn = uniform_bn(2)
        mt = MixtureOfTrees(bn.schema, np.log([0.5, 0.4]), (bn, bn))
        assert any("mixture" in v or "sum" in v for v in validate(mt))

    def test_non_tree_component_reported(self):
        rng = np.random.default_rng(10)
        bn = random_bn(rng, [2, 2, 2], max_parents=2)
        while all(len(bn.parents(v)) <= 1 for v in range(3)):
            bn = random_bn(rng, [2, 2, 2], max_parents=2)
        mt = MixtureOfTrees(bn.schema, np.array([0.0]), (bn,))
        assert any("tree-structured" in v for v in validate(mt))
