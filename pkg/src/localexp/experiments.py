"""Experiment pipelines: sigma sweeps of train/test MNF, rho growth studies,
bound evaluation runs and the analytic toys."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bounds as bnd
from .data import Dataset, SplitSpec, pairwise_distance_range, split
from .explainers import ExplanationSystem, LocalLinearModel, fit_nf_explainer, global_linear_fit
from .fidelity import empirical_mnf, empirical_nf, mnf_at
from .models import RegressionModel, fit_output_bound, mse
from .neighborhoods import GaussianNeighborhood
from .rho import rho_exact_discrete, rho_growth_exponent, rho_monte_carlo
from .synthetic import ToyManifoldSpec, analytic_optima, correlated_explanations, generate

AUTO_GRID_POINTS = 10
SATURATION_FRACTION = 0.5
NO_SATURATION_EXPONENT = 0.3


def auto_sigma_grid(data: Dataset | np.ndarray, n: int = AUTO_GRID_POINTS, max_pairs: int = 2_000_000,
                    seed: int = 0) -> list[float]:
    """``n`` log-spaced widths from the smallest to half the largest inter-example distance."""
    lo, hi = pairwise_distance_range(data, max_pairs, seed)
    if not lo > 0:
        raise ValueError("duplicate rows: smallest inter-example distance is 0")
    if not hi / 2 > lo:
        raise ValueError("half the largest distance does not exceed the smallest")
    return [float(v) for v in np.geomspace(lo, hi / 2, n)]


def _check_grid(grid) -> list[float]:
    g = [float(v) for v in grid]
    if not g:
        raise ValueError("sigma grid is empty")
    if any(v <= 0 for v in g) or any(b <= a for a, b in zip(g, g[1:])):
        raise ValueError("sigma grid must be positive and strictly increasing")
    return g


@dataclass
class SweepResult:
    rows: list[dict]
    global_linear_mnf: float
    explain_train_size: int
    explain_test_size: int

    def series(self, metric: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r["metric"] == metric]
        return (np.array([r["sigma"] for r in rows]), np.array([r["value"] for r in rows]),
                np.array([r["std_error"] for r in rows]))


def global_linear_mnf(model: RegressionModel, explain_train: Dataset) -> float:
    """Train MNF of the single global linear fit (the infinitely wide limit)."""
    g = global_linear_fit(model, explain_train.features)
    return float(np.mean((model.predict(explain_train.features) - g(explain_train.features)) ** 2))


def sweep_mnf(model: RegressionModel, explain_data: Dataset, sigma_grid, inner_samples: int = 256,
              seed: int = 0, ridge: float = 1e-8, split_seed: int | None = None,
              dataset_name: str = "data", model_kind: str | None = None) -> SweepResult:
    """Train/test MNF of the MNF explainer at each width.

    ``explain_data`` must not overlap the black-box training rows.  It is
    halved: explanations are fit on the first half (train MNF) and scored on
    the second (test MNF).
    """
    grid = _check_grid(sigma_grid)
    tr, te = split(explain_data, SplitSpec((0.5, 0.5), seed if split_seed is None else split_seed))
    rows = []
    for sigma in grid:
        system = ExplanationSystem(model, GaussianNeighborhood(sigma), tr, ridge=ridge)
        for metric, ev in (("trainMnf", tr), ("testMnf", te)):
            rep = empirical_mnf(system, ev, inner_samples, seed=seed, metric=metric)
            rows.append({
                "dataset": dataset_name, "model_kind": model_kind or model.kind, "explainer_kind": "mnf-wls",
                "sigma": sigma, "metric": metric, "value": rep.value, "std_error": rep.std_error,
                "inner_samples": inner_samples, "seed": seed, "skipped": rep.skipped, "valid": rep.valid,
            })
    return SweepResult(rows, global_linear_mnf(model, tr), tr.m, te.m)


def count_violations(values, allowance=None) -> int:
    """Number of consecutive decreases in ``values`` (beyond ``allowance`` when given)."""
    v = np.asarray(values, dtype=float)
    drop = v[:-1] - v[1:]
    if allowance is not None:
        drop = drop - np.asarray(allowance, dtype=float)
    return int(np.sum(drop > 0))


def rho_growth(data: Dataset, sigma_grid, m_grid, repeats: int = 5, samples_per_m: int = 10,
               seed: int = 0, delta: float = 0.01) -> list[dict]:
    out = []
    for sigma in _check_grid(sigma_grid):
        res = rho_growth_exponent(data, GaussianNeighborhood(sigma), m_grid, repeats, samples_per_m, seed, delta)
        out.append({"sigma": sigma, "exponent": res.exponent, "intercept": res.intercept,
                    "r_squared": res.r_squared, "table": res.table})
    return out


def no_saturation_flags(growth: list[dict], sweep: SweepResult | None,
                        max_exponent: float = NO_SATURATION_EXPONENT,
                        fraction: float = SATURATION_FRACTION) -> list[dict]:
    """Widths where rho grows slowly while train MNF stays well below the global-linear value."""
    train = {}
    if sweep is not None:
        for r in sweep.rows:
            if r["metric"] == "trainMnf":
                train[round(r["sigma"], 12)] = r["value"]
    flags = []
    for g in growth:
        t = train.get(round(g["sigma"], 12))
        ok = g["exponent"] <= max_exponent and t is not None and sweep is not None and \
            t < fraction * sweep.global_linear_mnf
        flags.append({"sigma": g["sigma"], "exponent": g["exponent"], "trainMnf": t, "flag": bool(ok)})
    return flags


def _sq_se(v: np.ndarray) -> tuple[float, float]:
    return float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0


def bounds_run(model: RegressionModel, sample: Dataset, heldout: Dataset, sigma: float,
               inner_samples: int = 64, delta: float = 0.05, seed: int = 0, B: float | None = None,
               ridge: float = 1e-8, rho_samples: int | None = None) -> dict[str, bnd.BoundReport]:
    """Evaluate all three bounds with their left-hand sides on one desk-scale run.

    ``sample`` is the labeled set f was trained on; ``heldout`` is labeled
    data unseen by f.  For the explanation bound, ``heldout`` is halved into
    an explanation-training sample (standing in for S) and a test half.
    """
    fam = GaussianNeighborhood(sigma)
    Bv = fit_output_bound(model, _stack(sample, heldout), B)
    ytest = heldout.require_targets()

    # bounds on f and on g, with g learned from the same sample as f
    system = ExplanationSystem(model, fam, sample, ridge=ridge)
    mnf_train = empirical_mnf(system, sample, inner_samples, seed=seed, metric="trainMnf")
    mnf_test = empirical_mnf(system, heldout, inner_samples, seed=seed + 1, metric="testMnf")
    g_err = empirical_mnf(system, heldout, inner_samples, seed=seed + 1, metric="gTestError", targets=ytest)
    alpha = max(mnf_train.max_coef_norm, mnf_test.max_coef_norm)
    rho_s = rho_monte_carlo(sample, fam, rho_samples, rng=np.random.default_rng([seed, 7]))
    rstar = bnd.rademacher_star_linear(sample, alpha)
    test_sq = (model.predict(heldout.features) - ytest) ** 2
    lhs_f, lhs_f_se = _sq_se(test_sq)
    prov = {"sigma": sigma, "seed": seed, "inner_samples": inner_samples, "m": sample.m,
            "heldout": heldout.m, "alpha": alpha, "B_source": "given" if B is not None else "measured"}
    t1 = bnd.theorem1_rhs(mse(model, sample), mnf_test.value, mnf_train.value, Bv, rho_s, rstar, sample.m,
                          delta, provenance=dict(prov, mnfTestStdError=mnf_test.std_error,
                                                 mnfTrainStdError=mnf_train.std_error))
    t1.lhs_estimate, t1.lhs_std_error = lhs_f, lhs_f_se
    t5 = bnd.theorem_alt_g_rhs(mse(model, sample), mnf_train.value, Bv, rho_s, rstar, sample.m, delta,
                               provenance=dict(prov, mnfTrainStdError=mnf_train.std_error))
    t5.lhs_estimate, t5.lhs_std_error = g_err.value, g_err.std_error

    # explanation bound: f fixed, g learned on data f never saw
    etr, ete = split(heldout, SplitSpec((0.5, 0.5), seed))
    esys = ExplanationSystem(model, fam, etr, ridge=ridge)
    e_train = empirical_mnf(esys, etr, inner_samples, seed=seed + 2, metric="trainMnf")
    e_test = empirical_mnf(esys, ete, inner_samples, seed=seed + 3, metric="testMnf")
    e_alpha = max(e_train.max_coef_norm, e_test.max_coef_norm)
    e_rho = rho_monte_carlo(etr, fam, rho_samples, rng=np.random.default_rng([seed, 8]))
    e_rstar = bnd.rademacher_star_linear(etr, e_alpha)
    t2 = bnd.theorem2_rhs(e_train.value, Bv, e_rho, e_rstar, etr.m, delta,
                          provenance=dict(prov, m=etr.m, alpha=e_alpha, trainMnfStdError=e_train.std_error))
    t2.lhs_estimate, t2.lhs_std_error = e_test.value, e_test.std_error
    return {"thm1-full": t1, "thm-alt-g": t5, "thm2-full": t2}


def _stack(a: Dataset, b: Dataset) -> Dataset:
    y = None
    if a.targets is not None and b.targets is not None:
        y = np.concatenate([a.targets, b.targets])
    return Dataset(np.vstack([a.features, b.features]), y, name=a.name)


def toy_report(kind: str, beta: float = 5.0, m: int = 50, k: float = 0.5, M: int | None = None,
               nf_samples: int = 100_000, seed: int = 0, inner_samples: int = 256) -> dict:
    """Fit both explainers / rho oracles on an analytic toy and report fitted vs analytic values."""
    spec = ToyManifoldSpec(kind, m=m, beta=beta, M=M, k=k, seed=seed)
    if kind == "beta-manifold":
        data, f = generate(spec)
        opt = analytic_optima(spec)
        fam = GaussianNeighborhood(1.0)
        system = ExplanationSystem(f, fam, data, ridge=0.0, on_singular="pinv")
        origin = np.zeros(2)
        g_mnf = system.fit(origin)
        g_nf = fit_nf_explainer(f, fam, origin, nf_samples, 0.0, np.random.default_rng(seed))
        on = np.array([[1.0, 0.0]])
        mnf_rep = empirical_mnf(system, data, inner_samples, seed=seed, metric="trainMnf")
        nf_rep = empirical_nf(f, lambda x: fit_nf_explainer(f, fam, np.zeros(2), nf_samples, 0.0,
                                                            np.random.default_rng(seed)),
                              data.subset(range(min(5, data.m))), fam, inner_samples, seed)
        return {
            "kind": kind, "beta": beta, "m": m, "seed": seed,
            "analytic": opt,
            "mnfExplainer": {"w1": float(g_mnf.weights[0]), "w2": float(g_mnf.weights[1]),
                             "intercept": g_mnf.intercept,
                             "onManifoldSqErrorAt1": float((g_mnf(on)[0] - f.predict(on)[0]) ** 2),
                             "trainMnf": mnf_rep.value},
            "nfExplainer": {"w1": float(g_nf.weights[0]), "w2": float(g_nf.weights[1]),
                            "intercept": g_nf.intercept,
                            "onManifoldSqErrorAt1": float((g_nf(on)[0] - f.predict(on)[0]) ** 2),
                            "nf": nf_rep.value, "nfStdError": nf_rep.std_error},
        }
    if kind == "correlated-3d":
        data, f = generate(spec)
        fam = GaussianNeighborhood(1.0)
        rng = np.random.default_rng(seed)
        out = {}
        for name, (b, w) in correlated_explanations().items():
            g = LocalLinearModel(w, b, np.zeros(3))
            vals = [mnf_at(lambda s, g=g: g, x, 16, rng, model=f, neighborhood=fam)[0] for x in data.features]
            out[name] = float(np.mean(vals))
        return {"kind": kind, "m": m, "seed": seed, "mnf": out,
                "allEqual": len(set(out.values())) == 1, "neighborhood": fam.config()}
    data, family = generate(spec)
    est = rho_exact_discrete(data, family)
    return {"kind": kind, "m": m, "k": k, "M": M if M is not None else m, "rho": est.value,
            "analyticRho": m ** ((1 - k) / 2)}
