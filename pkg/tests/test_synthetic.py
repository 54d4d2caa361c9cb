import numpy as np
import pytest

from localexp.data import write_csv, load_csv
from localexp.errors import DataError
from localexp.explainers import ExplanationSystem, LocalLinearModel, fit_nf_explainer
from localexp.neighborhoods import GaussianNeighborhood
from localexp.rho import rho_exact_discrete
from localexp.synthetic import (ToyManifoldSpec, analytic_optima, beta_manifold_function, correlated_explanations,
                                generate, overlap_layout)


class TestBetaManifold:
    def test_data_on_manifold(self):
        data, f = generate(ToyManifoldSpec("beta-manifold", m=30, seed=1))
        assert np.all(data.features[:, 1] == 0.0)
        np.testing.assert_array_equal(data.targets, data.features[:, 0])

    def test_function(self):
        f = beta_manifold_function(5.0)
        assert f.predict([2.0, 1.0]) == 2.0 - 5.0 * 2.0

    def test_optima_table(self):
        assert analytic_optima(ToyManifoldSpec("beta-manifold", beta=3.0)) == {"nfOptimalW1": -2.0,
                                                                                "mnfOptimalW1": 1.0}
        with pytest.raises(DataError):
            analytic_optima(ToyManifoldSpec("correlated-3d"))

    @pytest.mark.parametrize("beta", [0.0, 2.0, 5.0])
    def test_nf_optimum_and_on_manifold_error(self, beta):
        f = beta_manifold_function(beta)
        g = fit_nf_explainer(f, GaussianNeighborhood(1.0), np.zeros(2), 100_000, 0.0, np.random.default_rng(0))
        assert g.weights[0] == pytest.approx(1 - beta, abs=0.1)
        err = (g([1.0, 0.0]) - f.predict([1.0, 0.0])) ** 2
        assert err == pytest.approx(beta ** 2, abs=1.0)

    def test_mnf_exact_on_manifold(self):
        data, f = generate(ToyManifoldSpec("beta-manifold", m=50))
        g = ExplanationSystem(f, GaussianNeighborhood(1.0), data, ridge=0.0, on_singular="pinv").fit(np.zeros(2))
        assert abs(g.weights[0] - 1.0) < 1e-3
        assert (g([1.0, 0.0]) - f.predict([1.0, 0.0])) ** 2 < 1e-10


class TestCorrelated:
    def test_identical_predictions(self):
        data, f = generate(ToyManifoldSpec("correlated-3d", m=64, seed=9))
        ref = f.predict(data.features)
        for b, w in correlated_explanations().values():
            assert np.array_equal(LocalLinearModel(w, b, np.zeros(3))(data.features), ref)


class TestUniformOverlap:
    @pytest.mark.parametrize("m,k,M", [(16, 0.5, 16), (16, 0.5, 32), (16, 0.75, 16), (256, 0.5, 256),
                                       (25, 0.5, 50), (8, 1 / 3, 8), (16, 0.0, 16), (16, 1.0, 16)])
    def test_rho_law(self, m, k, M):
        anchors, fam = generate(ToyManifoldSpec("uniform-overlap", m=m, k=k, M=M))
        assert abs(rho_exact_discrete(anchors, fam).value - m ** ((1 - k) / 2)) <= 1e-12

    def test_every_atom_has_equal_coverage(self):
        anchors, fam = generate(ToyManifoldSpec("uniform-overlap", m=16, k=0.5, M=32))
        P = np.exp(fam.log_density_matrix(anchors, fam.atoms()))
        np.testing.assert_array_equal((P > 0).sum(axis=1), 4)

    def test_layout(self):
        assert overlap_layout(16, 0.5, 32) == (8, 2, 4)

    @pytest.mark.parametrize("m,k,M", [(64, 0.25, 64), (10, 0.5, 10), (16, 0.5, 12), (16, 1.5, 16)])
    def test_infeasible(self, m, k, M):
        with pytest.raises(DataError):
            ToyManifoldSpec("uniform-overlap", m=m, k=k, M=M)


def test_unknown_kind():
    with pytest.raises(DataError):
        ToyManifoldSpec("spiral")


def test_exportable(tmp_path):
    data, _ = generate(ToyManifoldSpec("beta-manifold", m=5))
    write_csv(data, tmp_path / "toy.csv")
    back = load_csv(tmp_path / "toy.csv", "y")
    np.testing.assert_array_equal(back.features, data.features)
