import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from netcorr.errors import DegenerateDataError
from netcorr.stats import (
    CategoricalSample,
    binary_equivalence_check,
    join_counts,
    moran_moments,
    morans_i,
    phi,
    phi_mean,
    phi_moments,
    standardize,
)
from netcorr.weights import WeightMatrix, adjacency_from_edges, weight_summary

from conftest import exact_moments, naive_moran, naive_phi, random_graph, random_weights, ring

seeds = st.integers(0, 2**32 - 1)


def _labels(rng, n, K):
    # at least two categories present
    while True:
        lab = rng.integers(0, K, size=n)
        if np.unique(lab).size >= 2:
            return lab


class TestCategoricalSample:
    def test_sample_proportions(self):
        s = CategoricalSample.from_values(["b", "a", "b", "b"])
        assert s.categories == ("a", "b")
        np.testing.assert_array_equal(s.labels, [1, 0, 1, 1])
        np.testing.assert_allclose(s.proportions, [0.25, 0.75])
        assert not s.supplied

    def test_declared_absent_category(self):
        s = CategoricalSample.from_values([0, 1, 1], categories=[0, 1, 2])
        np.testing.assert_array_equal(s.counts, [1, 2, 0])
        assert s.present().tolist() == [0, 1]

    def test_undeclared_value(self):
        with pytest.raises(ValueError, match="not a declared"):
            CategoricalSample.from_values([0, 3], categories=[0, 1])

    def test_single_category(self):
        with pytest.raises(DegenerateDataError):
            CategoricalSample.from_values(["a", "a", "a"])

    def test_bad_supplied_proportions(self):
        with pytest.raises(ValueError):
            CategoricalSample.from_values([0, 1], categories=[0, 1], proportions=[0.5, 0.6])

    def test_observed_category_needs_positive_proportion(self):
        with pytest.raises(ValueError):
            CategoricalSample.from_values([0, 1], categories=[0, 1], proportions=[1.0, 0.0])


class TestMoran:
    def test_three_path_zero(self):
        W = adjacency_from_edges([(0, 1), (1, 2)], 3)
        assert morans_i([0, 1, 2], W) == pytest.approx(0.0, abs=1e-15)

    def test_four_path(self, path4):
        assert morans_i([0, 0, 1, 1], path4) == pytest.approx(1 / 3, rel=1e-14)

    def test_constant(self, path4):
        with pytest.raises(DegenerateDataError):
            morans_i([2, 2, 2, 2], path4)

    def test_length_mismatch(self, path4):
        with pytest.raises(ValueError, match="values"):
            morans_i([1, 2, 3], path4)

    def test_matches_naive(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            W = random_weights(rng, 7)
            y = rng.standard_normal(7)
            assert morans_i(y, W) == pytest.approx(naive_moran(y, W.toarray()), rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.floats(-50, 50).filter(lambda a: abs(a) > 1e-3), st.floats(-100, 100))
    def test_affine_invariant(self, seed, a, b):
        rng = np.random.default_rng(seed)
        W = random_graph(rng, 8)
        y = rng.standard_normal(8)
        assert morans_i(a * y + b, W) == pytest.approx(morans_i(y, W), rel=1e-9, abs=1e-12)

    def test_mean_is_exact(self):
        W = ring(5)
        assert moran_moments(W, np.arange(5.0)).mu == -0.25

    def test_n_too_small(self):
        with pytest.raises(ValueError):
            moran_moments(adjacency_from_edges([(0, 1)], 2), [0.0, 1.0])

    def test_variance_transpose_invariant(self):
        rng = np.random.default_rng(1)
        W = random_weights(rng, 6)
        y = rng.standard_normal(6)
        for variant in ("randomization", "normality"):
            a = moran_moments(W, y, variant=variant).variance
            b = moran_moments(W.T, y, variant=variant).variance
            assert a == pytest.approx(b, rel=1e-13)

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_randomization_moments_exhaustive(self, n):
        rng = np.random.default_rng(n)
        for _ in range(4):
            W = random_weights(rng, n)
            y = rng.standard_normal(n)
            mean, var = exact_moments(y, lambda p: morans_i(p, W))
            m = moran_moments(W, y)
            assert mean == pytest.approx(-1 / (n - 1), rel=1e-12)
            assert m.variance == pytest.approx(var, rel=1e-10)

    def test_normality_variant_by_simulation(self):
        # i.i.d. Gaussian data: the variance of I over fresh draws matches
        W = ring(12)
        rng = np.random.default_rng(0)
        draws = np.array([morans_i(rng.standard_normal(12), W) for _ in range(40000)])
        m = moran_moments(W, variant="normality")
        assert draws.mean() == pytest.approx(m.mu, abs=0.004)
        assert draws.var() == pytest.approx(m.variance, rel=0.03)

    def test_path_z_sign(self, path4):
        y = [0.0, 0.0, 1.0, 1.0]
        z = standardize(morans_i(y, path4), moran_moments(path4, y))
        assert np.isfinite(z) and z > 0


class TestStandardize:
    def test_values(self):
        m = moran_moments(ring(6), np.arange(6.0))
        assert standardize(m.mu, m) == 0.0
        assert standardize(m.mu + np.sqrt(m.variance), m) == pytest.approx(1.0)

    def test_nonpositive_variance(self):
        class M:
            mu, variance = 0.0, 0.0

        with pytest.raises(DegenerateDataError):
            standardize(1.0, M)


class TestPhi:
    def test_two_node(self):
        W = adjacency_from_edges([(0, 1)], 2)
        assert phi(CategoricalSample.from_values(["a", "b"]), W) == -4.0

    def test_four_path(self, path4):
        assert phi(CategoricalSample.from_values(list("aabb")), path4) == pytest.approx(4 / 3, rel=1e-14)

    def test_swap_invariant(self, path4):
        a = phi(CategoricalSample.from_values(list("aabb")), path4)
        b = phi(CategoricalSample.from_values(list("bbaa")), path4)
        assert a == b

    def test_single_category(self, path4):
        s = CategoricalSample.from_values([0, 0, 0, 0], categories=[0, 1], proportions=[0.5, 0.5])
        with pytest.raises(DegenerateDataError):
            phi(s, path4)

    def test_matches_naive(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            W = random_weights(rng, 7)
            lab = _labels(rng, 7, 3)
            s = CategoricalSample.from_values(lab)
            assert phi(s, W) == pytest.approx(naive_phi(lab, W.toarray()), rel=1e-12)

    def test_supplied_proportions(self, path4):
        s = CategoricalSample.from_values(list("aabb"), categories=["a", "b", "c"], proportions=[0.2, 0.3, 0.5])
        expected = naive_phi(list("aabb"), path4.toarray(), {"a": 0.2, "b": 0.3})
        assert phi(s, path4) == pytest.approx(expected, rel=1e-13)

    def test_pair_signs(self):
        # a lone concordant pair contributes positively, a lone discordant pair negatively
        W = WeightMatrix.from_triplets([0], [1], [1.0], 4)
        assert phi(CategoricalSample.from_values(list("aabb")), W) > 0
        assert phi(CategoricalSample.from_values(list("abab")), W) < 0

    def test_symmetrization_invariant(self):
        rng = np.random.default_rng(4)
        W = random_weights(rng, 8)
        s = CategoricalSample.from_values(_labels(rng, 8, 3))
        assert phi(s, W) == pytest.approx(phi(s, W.symmetrized()), rel=1e-13)
        y = rng.standard_normal(8)
        assert morans_i(y, W) == pytest.approx(morans_i(y, W.symmetrized()), rel=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_node_relabeling(self, seed):
        rng = np.random.default_rng(seed)
        n = 9
        W = random_weights(rng, n)
        lab = _labels(rng, n, 3)
        y = rng.standard_normal(n)
        perm = rng.permutation(n)
        A = W.toarray()
        Wp = WeightMatrix(A[np.ix_(perm, perm)])
        s, sp = CategoricalSample.from_values(lab), CategoricalSample.from_values(lab[perm])
        assert phi(sp, Wp) == pytest.approx(phi(s, W), rel=1e-12)
        assert morans_i(y[perm], Wp) == pytest.approx(morans_i(y, W), rel=1e-12)
        np.testing.assert_allclose(join_counts(sp, Wp), join_counts(s, W), rtol=1e-12)


class TestPhiMoments:
    def test_two_node_mean(self):
        assert phi_mean(CategoricalSample.from_values(["a", "b"])) == -4.0

    def test_four_path_exhaustive(self, path4):
        s = CategoricalSample.from_values(list("aabb"))
        m = phi_moments(s, weight_summary(path4))
        mean, var = exact_moments(s.labels, lambda p: phi(s.with_labels(p), path4))
        assert m.mu == pytest.approx(mean, rel=1e-10)
        assert m.variance == pytest.approx(var, rel=1e-10)

    def test_small_n(self):
        W = adjacency_from_edges([(0, 1), (1, 2)], 3)
        with pytest.raises(DegenerateDataError):
            phi_moments(CategoricalSample.from_values(list("aab")), weight_summary(W))

    def test_supplied_rejected(self, path4):
        s = CategoricalSample.from_values(list("aabb"), categories=["a", "b"], proportions=[0.5, 0.5])
        with pytest.raises(ValueError):
            phi_moments(s, weight_summary(path4))

    @pytest.mark.parametrize("K", [2, 3, 4])
    def test_weighted_asymmetric_exhaustive(self, K):
        rng = np.random.default_rng(10 + K)
        for _ in range(3):
            n = int(rng.integers(max(4, K), 8))
            W = random_weights(rng, n)
            s = CategoricalSample.from_values(_labels(rng, n, K))
            m = phi_moments(s, weight_summary(W))
            mean, var = exact_moments(s.labels, lambda p: phi(s.with_labels(p), W))
            assert m.mu == pytest.approx(mean, rel=1e-10)
            assert m.variance == pytest.approx(var, rel=1e-10)

    def test_absent_declared_category_ignored(self, path4):
        full = CategoricalSample.from_values(list("aabb"))
        padded = CategoricalSample.from_values(list("aabb"), categories=["a", "b", "c"])
        assert phi(padded, path4) == phi(full, path4)
        a, b = phi_moments(full, weight_summary(path4)), phi_moments(padded, weight_summary(path4))
        assert (a.mu, a.variance) == (b.mu, b.variance)

    @settings(max_examples=60, deadline=None)
    @given(seeds, st.integers(4, 40), st.integers(2, 6))
    def test_invariants(self, seed, n, K):
        rng = np.random.default_rng(seed)
        assume(K <= n)
        W = random_graph(rng, n, p=0.3)
        s = CategoricalSample.from_values(_labels(rng, n, K))
        m = phi_moments(s, weight_summary(W))
        assert m.q22 == pytest.approx(m.q1**2, rel=1e-9)
        assert m.variance >= -1e-9 * m.second_moment
        assert m.variance == pytest.approx(m.second_moment - m.mu**2, rel=1e-12, abs=1e-12)
        assert m.mu == pytest.approx(phi_mean(s), rel=1e-14)


class TestJoinCounts:
    def test_path(self, path4):
        np.testing.assert_array_equal(join_counts(CategoricalSample.from_values(list("aabb")), path4), [1, 1])

    def test_all_distinct(self, path4):
        np.testing.assert_array_equal(join_counts(CategoricalSample.from_values(list("abcd")), path4), [0, 0, 0, 0])

    def test_triangle(self):
        W = adjacency_from_edges([(0, 1), (1, 2), (0, 2)], 3)
        s = CategoricalSample.from_values(["a"] * 3, categories=["a", "b"], proportions=[0.5, 0.5])
        np.testing.assert_array_equal(join_counts(s, W), [3, 0])

    def test_half_weight_convention(self):
        W = WeightMatrix.from_triplets([0, 1], [1, 0], [2.0, 4.0], 3)
        s = CategoricalSample.from_values([0, 0, 1])
        np.testing.assert_array_equal(join_counts(s, W), [3.0, 0.0])


class TestBinaryEquivalence:
    def test_path(self, path4):
        z_i, z_phi = binary_equivalence_check([0, 0, 1, 1], path4)
        assert z_i == pytest.approx(z_phi, abs=1e-12)
        y = np.array([0.0, 0, 1, 1])
        mean, var = exact_moments(y, lambda p: morans_i(p, path4))
        assert z_i == pytest.approx((1 / 3 - mean) / np.sqrt(var), rel=1e-10)

    def test_alternating_ring(self):
        z_i, z_phi = binary_equivalence_check([0, 1] * 3, ring(6))
        assert z_i == pytest.approx(z_phi, abs=1e-12)
        assert z_i < 0

    def test_constant(self, path4):
        with pytest.raises(DegenerateDataError):
            binary_equivalence_check([1, 1, 1, 1], path4)

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(4, 30))
    def test_random(self, seed, n):
        rng = np.random.default_rng(seed)
        W = random_weights(rng, n, density=0.3)
        z_i, z_phi = binary_equivalence_check(_labels(rng, n, 2), W)
        assert abs(z_i - z_phi) <= 1e-8
