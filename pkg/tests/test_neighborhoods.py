import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid
from scipy.stats import multivariate_normal, norm

from localexp.neighborhoods import (DiscreteUniformNeighborhood, GaussianNeighborhood, PointMassNeighborhood,
                                    from_config)

coords = st.floats(-50, 50, allow_nan=False)


class TestGaussian:
    def test_matches_scipy(self, rng):
        fam = GaussianNeighborhood(0.7)
        a, q = rng.standard_normal(4), rng.standard_normal(4)
        ref = multivariate_normal(a, 0.49 * np.eye(4)).logpdf(q)
        assert fam.log_density(a, q) == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("sigma", [0.05, 1.0, 3.0])
    def test_integrates_to_one(self, sigma):
        fam = GaussianNeighborhood(sigma)
        grid = np.linspace(0.3 - 8 * sigma, 0.3 + 8 * sigma, 20001)
        p = np.exp(fam.log_density_matrix(np.array([[0.3]]), grid[:, None])[:, 0])
        assert abs(trapezoid(p, grid) - 1.0) < 1e-6

    @given(a=st.lists(coords, min_size=3, max_size=3), q=st.lists(coords, min_size=3, max_size=3),
           shift=st.integers(-64, 64))
    @settings(max_examples=100, deadline=None)
    def test_translation_invariance(self, a, q, shift):
        # integer translations of quarter-grid points are exact in binary floating point
        fam = GaussianNeighborhood(1.3)
        a = np.round(np.array(a) * 4) / 4
        q = np.round(np.array(q) * 4) / 4
        assert fam.log_density(a + shift, q + shift) == fam.log_density(a, q)

    def test_translation_invariance_general(self, rng):
        fam = GaussianNeighborhood(0.9)
        for _ in range(50):
            a, q, t = rng.standard_normal((3, 5))
            assert fam.log_density(a + t, q + t) == pytest.approx(fam.log_density(a, q), rel=1e-12, abs=1e-12)

    @given(a=st.lists(coords, min_size=2, max_size=2), q=st.lists(coords, min_size=2, max_size=2))
    @settings(max_examples=100, deadline=None)
    def test_symmetry(self, a, q):
        fam = GaussianNeighborhood(2.0)
        assert fam.log_density(a, q) == fam.log_density(q, a)

    def test_vector_and_matrix_agree(self, rng):
        fam = GaussianNeighborhood(0.5)
        A, Q = rng.standard_normal((7, 2)), rng.standard_normal((4, 2))
        M = fam.log_density_matrix(A, Q)
        assert M.shape == (4, 7)
        for j, q in enumerate(Q):
            np.testing.assert_array_equal(fam.log_density_vector(A, q), M[j])

    def test_no_underflow_in_high_dimension(self, rng):
        fam = GaussianNeighborhood(0.1)
        A = rng.standard_normal((5, 50))
        L = fam.log_density_vector(A, A[0] + 3.0)
        assert np.all(np.isfinite(L))

    def test_sample_moments(self):
        fam = GaussianNeighborhood(0.4)
        X = fam.sample(np.array([1.0, -2.0]), np.random.default_rng(0), size=200_000)
        np.testing.assert_allclose(X.mean(axis=0), [1.0, -2.0], atol=5e-3)
        np.testing.assert_allclose(X.std(axis=0), 0.4, rtol=5e-3)

    def test_sample_is_seeded(self):
        fam = GaussianNeighborhood(1.0)
        a = fam.sample(np.zeros(3), np.random.default_rng(5), size=4)
        b = fam.sample(np.zeros(3), np.random.default_rng(5), size=4)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("sigma", [0.0, -1.0, math.inf])
    def test_rejects_bad_sigma(self, sigma):
        with pytest.raises(ValueError):
            GaussianNeighborhood(sigma)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            GaussianNeighborhood(1.0).log_density_matrix(np.zeros((2, 2)), np.zeros((1, 3)))

    def test_config_roundtrip(self):
        fam = from_config(GaussianNeighborhood(0.25).config())
        assert isinstance(fam, GaussianNeighborhood) and fam.sigma == 0.25


class TestDiscreteUniform:
    def setup_method(self):
        self.anchors = np.array([[0.0], [1.0]])
        self.fam = DiscreteUniformNeighborhood(self.anchors, [[0.0, 1.0, 2.0], [2.0, 3.0]])

    def test_density_on_and_off_support(self):
        assert self.fam.log_density([0.0], [2.0]) == pytest.approx(-math.log(3))
        assert self.fam.log_density([1.0], [2.0]) == pytest.approx(-math.log(2))
        assert self.fam.log_density([1.0], [0.0]) == -math.inf

    def test_atom_union(self):
        np.testing.assert_array_equal(self.fam.atoms()[:, 0], [0, 1, 2, 3])

    def test_unknown_anchor(self):
        with pytest.raises(ValueError):
            self.fam.log_density([0.5], [0.0])

    def test_sampling_hits_support_uniformly(self):
        draws = self.fam.sample([0.0], np.random.default_rng(1), size=30_000)[:, 0]
        counts = np.array([(draws == v).sum() for v in (0, 1, 2)])
        assert counts.sum() == 30_000
        np.testing.assert_allclose(counts / 30_000, 1 / 3, atol=0.015)

    def test_probabilities_sum_to_one(self):
        P = np.exp(self.fam.log_density_matrix(self.anchors, self.fam.atoms()))
        np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-15)


class TestPointMass:
    def test_samples_anchor(self):
        fam = PointMassNeighborhood()
        np.testing.assert_array_equal(fam.sample(np.array([1.0, 2.0]), np.random.default_rng(0), size=3),
                                      [[1.0, 2.0]] * 3)

    def test_has_no_density(self):
        fam = PointMassNeighborhood()
        assert not fam.has_density
        with pytest.raises(ValueError):
            fam.log_density([0.0], [0.0])


def test_gaussian_factorizes_over_coordinates(rng):
    fam = GaussianNeighborhood(0.3)
    a, q = rng.standard_normal(6), rng.standard_normal(6)
    ref = norm(a, 0.3).logpdf(q).sum()
    assert fam.log_density(a, q) == pytest.approx(ref, rel=1e-12)
