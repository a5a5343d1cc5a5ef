import itertools

import numpy as np
import pytest

from netcorr.errors import DegenerateDataError
from netcorr.inference import (
    PermutationPlan,
    p_value_normal,
    p_value_permutation,
    permutation_indices,
    permutation_null,
    run_joincount_tests,
    run_moran_test,
    run_phi_test,
)
from netcorr.simgen import gen_sar
from netcorr.stats import CategoricalSample, join_counts, morans_i, phi
from netcorr.weights import adjacency_from_edges, lattice_weights

from conftest import random_graph, ring


class TestPlan:
    def test_defaults(self):
        plan = PermutationPlan()
        assert (plan.m, plan.tail) == (500, "upper")

    @pytest.mark.parametrize("kw", [{"m": 0}, {"seed": -1}, {"seed": 2**64}, {"tail": "left"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PermutationPlan(**kw)


class TestPermutationNull:
    def test_indices_are_permutations(self):
        P = permutation_indices(3, 0, 20, 9)
        assert P.shape == (9, 20)
        assert all(sorted(col) == list(range(9)) for col in P.T)

    def test_replicate_streams_are_positional(self):
        a = permutation_indices(5, 0, 300, 12)
        b = permutation_indices(5, 250, 300, 12)
        np.testing.assert_array_equal(a[:, 250:], b)

    def test_matches_direct_evaluation(self):
        rng = np.random.default_rng(0)
        W = random_graph(rng, 10, p=0.4)
        y = rng.standard_normal(10)
        s = CategoricalSample.from_values(rng.integers(0, 3, 10))
        plan = PermutationPlan(m=40, seed=9)
        P = permutation_indices(9, 0, 40, 10)
        direct_i = [morans_i(y[P[:, r]], W) for r in range(40)]
        direct_phi = [phi(s.with_labels(s.labels[P[:, r]]), W) for r in range(40)]
        direct_j = [join_counts(s.with_labels(s.labels[P[:, r]]), W) for r in range(40)]
        np.testing.assert_allclose(permutation_null("moran", y, W, plan), direct_i, rtol=1e-12)
        np.testing.assert_allclose(permutation_null("phi", s, W, plan), direct_phi, rtol=1e-12)
        np.testing.assert_allclose(permutation_null("joincount", s, W, plan), direct_j, rtol=1e-12)

    def test_thread_count_does_not_matter(self):
        W = lattice_weights(8, 8)
        y = np.random.default_rng(1).standard_normal(64)
        plan = PermutationPlan(m=700, seed=4)
        a = permutation_null("moran", y, W, plan, threads=1)
        b = permutation_null("moran", y, W, plan, threads=4)
        np.testing.assert_array_equal(a, b)

    def test_constant_fails_early(self):
        with pytest.raises(DegenerateDataError):
            permutation_null("moran", np.ones(5), ring(5), PermutationPlan(m=10))

    def test_two_node_phi_constant(self):
        W = adjacency_from_edges([(0, 1)], 2)
        draws = permutation_null("phi", CategoricalSample.from_values(["a", "b"]), W, PermutationPlan(m=25))
        np.testing.assert_array_equal(draws, -4.0)

    def test_exhaustive_mean(self):
        # every permutation drawn equally often: the mean of I is -1/(n-1)
        W = ring(6)
        y = np.random.default_rng(2).standard_normal(6)
        vals = [morans_i(y[list(p)], W) for p in itertools.permutations(range(6))]
        assert np.mean(vals) == pytest.approx(-0.2, abs=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            permutation_null("geary", np.arange(4.0), ring(4), PermutationPlan(m=2))


class TestPValues:
    def test_extreme_observation(self):
        assert p_value_permutation(10.0, np.zeros(499)) == pytest.approx(0.002)

    def test_all_equal(self):
        assert p_value_permutation(1.0, np.ones(99)) == 1.0
        assert p_value_permutation(1.0, np.ones(99), "lower") == 1.0
        assert p_value_permutation(1.0, np.ones(99), "two_sided") == 1.0

    def test_tie_tolerance(self):
        # rounding noise in a permuted statistic still counts as a tie
        assert p_value_permutation(0.3, np.array([0.1 + 0.2])) == 1.0

    def test_median(self):
        draws = np.random.default_rng(0).standard_normal(20000)
        assert p_value_permutation(0.0, draws) == pytest.approx(0.5, abs=0.01)

    def test_two_sided(self):
        draws = np.arange(1.0, 100.0)
        assert p_value_permutation(2.0, draws, "lower") == pytest.approx(0.03)
        assert p_value_permutation(2.0, draws, "two_sided") == pytest.approx(0.06)

    def test_range(self):
        draws = np.random.default_rng(1).standard_normal(99)
        for obs in (-5.0, 0.0, 5.0):
            for tail in ("upper", "lower", "two_sided"):
                assert 0.01 <= p_value_permutation(obs, draws, tail) <= 1.0

    def test_empty(self):
        with pytest.raises(ValueError):
            p_value_permutation(1.0, [])

    def test_normal(self):
        assert p_value_normal(0.0) == 0.5
        assert p_value_normal(1.96, "two_sided") == pytest.approx(0.05, abs=1e-4)
        assert p_value_normal(40.0) == pytest.approx(0.0, abs=1e-300)
        assert p_value_normal(-1.0, "lower") == pytest.approx(p_value_normal(1.0))


class TestRunTests:
    def test_moran_result_fields(self):
        W = lattice_weights(6, 6)
        y = np.random.default_rng(0).standard_normal(36)
        res = run_moran_test(y, W, PermutationPlan(m=99, seed=1))
        d = res.to_dict()
        for key in ("statistic", "z", "p_permutation", "p_normal", "moments", "diagnostics", "n", "s0", "m_used", "seed"):
            assert d[key] is not None
        assert 1 / 100 <= res.p_permutation <= 1

    def test_moran_null_calibration(self):
        W = lattice_weights(10, 10)
        rng = np.random.default_rng(7)
        rejections = []
        for r in range(500):
            res = run_moran_test(rng.standard_normal(100), W, PermutationPlan(m=99, seed=r))
            rejections.append(res.p_permutation <= 0.05)
        rate = np.mean(rejections)
        # binomial sd is about 0.01 at 500 runs
        assert 0.02 <= rate <= 0.08

    def test_strong_dependence(self):
        W = lattice_weights(10, 10)
        y = gen_sar(W, 0.95, seed=3)
        res = run_moran_test(y, W, PermutationPlan(m=199, seed=0))
        assert res.p_permutation == pytest.approx(1 / 200)

    def test_phi_supplied_proportions_drop_z(self):
        W = ring(8)
        s = CategoricalSample.from_values(list("aabbaabb"), categories=["a", "b"], proportions=[0.4, 0.6])
        res = run_phi_test(s, W, PermutationPlan(m=50))
        assert res.z is None and res.p_normal is None
        assert res.p_permutation is not None

    def test_phi_two_node(self):
        W = adjacency_from_edges([(0, 1)], 2)
        res = run_phi_test(CategoricalSample.from_values(["a", "b"]), W, PermutationPlan(m=19))
        assert res.p_permutation == 1.0 and res.z is None

    def test_phi_single_category(self):
        s = CategoricalSample.from_values([0] * 4, categories=[0, 1], proportions=[0.5, 0.5])
        with pytest.raises(DegenerateDataError):
            run_phi_test(s, ring(4), PermutationPlan(m=5))

    def test_no_plan(self):
        res = run_moran_test(np.arange(6.0), ring(6), None)
        assert res.p_permutation is None and res.p_normal is not None
        with pytest.raises(ValueError):
            run_moran_test(np.arange(6.0), ring(6), None, normal=False)

    def test_keep_draws(self):
        res = run_moran_test(np.arange(6.0), ring(6), PermutationPlan(m=30), keep_draws=True)
        assert res.null_draws.shape == (30,)

    def test_joincount_layout(self):
        W = ring(12)
        s = CategoricalSample.from_values([0, 0, 0, 1, 1, 1, 2, 2, 2, 0, 1, 2], categories=[0, 1, 2, 3])
        out = run_joincount_tests(s, W, PermutationPlan(m=99, seed=2))
        assert [r.category for r in out] == [0, 1, 2, 3]
        assert [r.n_category for r in out] == [4, 4, 4, 0]
        assert out[3].skipped and out[3].p_permutation is None
        assert all(r.p_permutation is not None for r in out[:3])
        assert [r.statistic for r in out[:3]] == [2.0, 2.0, 2.0]
        assert out[0].to_dict()["category"] == 0
