"""Fidelity metrics: NF, MNF (per point, train/test averages), MSE, and the
expectation-swap identity for finite cases."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .data import Dataset
from .errors import DataError, DegenerateWeightsError
from .explainers import ExplanationSystem, LocalLinearModel
from .models import RegressionModel
from .models import mse as _model_mse
from .neighborhoods import DiscreteUniformNeighborhood, NeighborhoodFamily

DEFAULT_INNER_SAMPLES = 256
MAX_SKIP_FRACTION = 0.01


@dataclass(frozen=True)
class FidelityReport:
    metric: str
    value: float
    std_error: float
    inner_samples: int
    eval_points: int
    sigma: float = float("nan")
    skipped: int = 0
    max_coef_norm: float = float("nan")

    @property
    def valid(self) -> bool:
        total = self.inner_samples * self.eval_points
        return total == 0 or self.skipped <= MAX_SKIP_FRACTION * total

    def row(self) -> dict:
        out = asdict(self)
        out["valid"] = self.valid
        return out


def point_stream(seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for evaluation point ``index``."""
    return np.random.default_rng([int(seed), int(index)])


def _sigma_of(family: NeighborhoodFamily) -> float:
    return float(getattr(family, "sigma", float("nan")))


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(np.mean(v)), se


def _errors_at_sources(system, x: np.ndarray, fx: float, sources: np.ndarray, rng=None):
    """Squared errors (f(x) - g_{x'}(x))^2 for each source row; NaN marks a skipped draw."""
    if isinstance(system, ExplanationSystem) and system.kind == "mnf-wls":
        coef, _, ok = system.fit_batch(sources)
        pred = coef[:, 0] + coef[:, 1:] @ x
        return np.where(ok, (fx - pred) ** 2, np.nan)
    out = np.empty(sources.shape[0])
    for k, s in enumerate(sources):
        try:
            g = system.fit(s, rng) if isinstance(system, ExplanationSystem) else system(s)
            out[k] = (fx - g(x)) ** 2
        except DegenerateWeightsError:
            out[k] = np.nan
    return out


def _model_of(system):
    return system.model if isinstance(system, ExplanationSystem) else None


def mnf_at(system: ExplanationSystem | Callable[[np.ndarray], LocalLinearModel], x,
           inner_samples: int = DEFAULT_INNER_SAMPLES, rng: np.random.Generator | None = None,
           model: RegressionModel | None = None, neighborhood: NeighborhoodFamily | None = None,
           exact: bool = False) -> tuple[float, float, int]:
    """MNF at target ``x``: mean of ``(f(x) - g_{x'}(x))^2`` over ``x' ~ N^mir_x``.

    ``system`` is an :class:`ExplanationSystem` or any callable returning an
    explanation for a source point (then ``model`` and ``neighborhood`` are
    required).  With ``exact=True`` and a discrete-uniform neighborhood the
    expectation is enumerated over the support instead of sampled.

    Returns ``(value, std_error, skipped)``.
    """
    x = np.asarray(x, dtype=float)
    model = model or _model_of(system)
    neighborhood = neighborhood or system.neighborhood
    if model is None:
        raise ValueError("model is required when system is a plain callable")
    fx = float(model.predict(x))
    if exact:
        if not isinstance(neighborhood, DiscreteUniformNeighborhood):
            raise ValueError("exact enumeration needs a discrete-uniform neighborhood")
        sources = neighborhood.supports[neighborhood.anchor_index(x)]
    else:
        if inner_samples < 1:
            raise ValueError("inner_samples must be >= 1")
        rng = rng if rng is not None else np.random.default_rng()
        sources = neighborhood.sample(x, rng, size=inner_samples)
    err = _errors_at_sources(system, x, fx, sources, rng)
    skipped = int(np.isnan(err).sum())
    value, se = _mean_se(err[~np.isnan(err)])
    return value, se, skipped


def empirical_mnf(system: ExplanationSystem, eval_set: Dataset | np.ndarray,
                  inner_samples: int = DEFAULT_INNER_SAMPLES, seed: int = 0,
                  metric: str = "mnf", targets=None, chunk_sources: int = 8192) -> FidelityReport:
    """Average of :func:`mnf_at` over the rows of ``eval_set``.

    Call it with the explanation-training rows for train MNF and with
    held-out rows for test MNF.  Point ``i`` draws from
    ``point_stream(seed, i)`` so results do not depend on batching, and
    Gaussian draws for different sigmas share the same underlying normals.
    The reported standard error is the Monte-Carlo error given the
    evaluation set.

    ``targets`` replaces f(x) as the reference value, which turns the
    metric into the explanations' own squared error against labels.
    """
    X = eval_set.features if isinstance(eval_set, Dataset) else np.atleast_2d(np.asarray(eval_set, float))
    n_eval = X.shape[0]
    if n_eval == 0:
        raise DataError("evaluation set is empty")
    if inner_samples < 1:
        raise ValueError("inner_samples must be >= 1")
    fam = system.neighborhood
    fX = system.model.predict(X) if targets is None else np.asarray(targets, dtype=float).reshape(-1)
    if fX.shape[0] != n_eval:
        raise DataError("targets must have one entry per evaluation row")
    max_norm = 0.0
    means = np.empty(n_eval)
    ses = np.empty(n_eval)
    skipped = 0
    batched = system.kind == "mnf-wls"
    per_chunk = max(1, chunk_sources // inner_samples)
    for s in range(0, n_eval, per_chunk if batched else 1):
        idx = range(s, min(n_eval, s + (per_chunk if batched else 1)))
        rngs = [point_stream(seed, i) for i in idx]
        sources = np.concatenate([fam.sample(X[i], r, size=inner_samples) for i, r in zip(idx, rngs)])
        if batched:
            coef, _, ok = system.fit_batch(sources)
            if ok.any():
                max_norm = max(max_norm, float(np.max(np.linalg.norm(coef[ok], axis=1))))
            tgt = np.repeat(X[list(idx)], inner_samples, axis=0)
            pred = coef[:, 0] + np.einsum("nd,nd->n", coef[:, 1:], tgt)
            err = np.where(ok, (np.repeat(fX[list(idx)], inner_samples) - pred) ** 2, np.nan)
        else:
            err = _errors_at_sources(system, X[s], float(fX[s]), sources, rngs[0])
        err = err.reshape(len(idx), inner_samples)
        for k, i in enumerate(idx):
            e = err[k][~np.isnan(err[k])]
            skipped += inner_samples - e.size
            means[i], ses[i] = _mean_se(e)
    good = ~np.isnan(means)
    value = float(np.mean(means[good])) if good.any() else float("nan")
    se = float(math.sqrt(np.sum(ses[good] ** 2)) / good.sum()) if good.any() else float("nan")
    return FidelityReport(metric, value, se, inner_samples, n_eval, _sigma_of(fam), skipped,
                          max_norm if batched else float("nan"))


def empirical_nf(model: RegressionModel, explainer_at_source: Callable[[np.ndarray], LocalLinearModel],
                 eval_set: Dataset | np.ndarray, neighborhood: NeighborhoodFamily,
                 inner_samples: int = DEFAULT_INNER_SAMPLES, seed: int = 0) -> FidelityReport:
    """NF: explanation fitted at each evaluation point x, scored on targets drawn from N_x."""
    X = eval_set.features if isinstance(eval_set, Dataset) else np.atleast_2d(np.asarray(eval_set, float))
    if X.shape[0] == 0:
        raise DataError("evaluation set is empty")
    means = np.empty(X.shape[0])
    ses = np.empty(X.shape[0])
    for i, x in enumerate(X):
        g = explainer_at_source(x)
        T = neighborhood.sample(x, point_stream(seed, i), size=inner_samples)
        err = (model.predict(T) - (T @ g.weights + g.intercept)) ** 2
        means[i], ses[i] = _mean_se(err)
    return FidelityReport("nf", float(means.mean()), float(math.sqrt(np.sum(ses ** 2)) / X.shape[0]),
                          inner_samples, X.shape[0], _sigma_of(neighborhood))


def mse(model: RegressionModel, data: Dataset) -> float:
    """Mean squared error of ``model`` against the targets of ``data``."""
    return _model_mse(model, data)


@dataclass(frozen=True)
class SwapResult:
    lhs: float
    rhs: float
    source_marginal: np.ndarray
    target_conditional: np.ndarray


def swap_identity_check(atoms, probs, neighborhood: DiscreteUniformNeighborhood, g_table, f_table,
                        sources=None) -> SwapResult:
    """Evaluate MNF on a finite problem in both orders of expectation.

    ``atoms``/``probs`` define a finite D; ``neighborhood`` must have those
    atoms as anchors.  ``sources`` lists every possible source point (default:
    the union of the neighborhood supports).  ``g_table[j, i]`` is the
    prediction of the explanation fitted at ``sources[j]`` evaluated at
    ``atoms[i]``; ``f_table[i] = f(atoms[i])``.

    ``lhs`` is E_{x~D} E_{x'~N(x)}; ``rhs`` builds the source marginal
    D-dagger and the conditional N-dagger explicitly and takes
    E_{x'~D-dagger} E_{x~N-dagger(x')}.
    """
    A = np.atleast_2d(np.asarray(atoms, dtype=float))
    if A.shape[0] == 1 and neighborhood.dimension == 1 and A.shape[1] != 1:
        A = A.T
    p = np.asarray(probs, dtype=float)
    Sx = neighborhood.atoms() if sources is None else np.atleast_2d(np.asarray(sources, dtype=float))
    g = np.asarray(g_table, dtype=float)
    f = np.asarray(f_table, dtype=float)
    if p.shape != (A.shape[0],) or f.shape != (A.shape[0],):
        raise DataError("probs and f_table need one entry per atom of D")
    if g.shape != (Sx.shape[0], A.shape[0]):
        raise DataError(f"g_table must have shape {(Sx.shape[0], A.shape[0])}, got {g.shape}")
    if abs(p.sum() - 1) > 1e-12 or np.any(p < 0):
        raise DataError("probs must be a probability vector")
    # joint[j, i] = p_D(x_i) * p_N(x_i)(x'_j)
    Pn = np.exp(neighborhood.log_density_matrix(A, Sx))
    sq = (f[None, :] - g) ** 2
    lhs = float(sum(p[i] * sum(Pn[j, i] * sq[j, i] for j in range(Sx.shape[0])) for i in range(A.shape[0])))
    joint = Pn * p[None, :]
    marg = joint.sum(axis=1)
    cond = np.divide(joint, marg[:, None], out=np.zeros_like(joint), where=marg[:, None] > 0)
    rhs = float(sum(marg[j] * sum(cond[j, i] * sq[j, i] for i in range(A.shape[0])) for j in range(Sx.shape[0])))
    return SwapResult(lhs, rhs, marg, cond)


RESULT_FIELDS = ["dataset", "model_kind", "explainer_kind", "sigma", "metric", "value",
                 "std_error", "inner_samples", "seed"]


def append_results(path, rows: list[dict]) -> None:
    """Append report rows to a results CSV, writing the header for a new file."""
    path = Path(path)
    new = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, extrasaction="ignore", lineterminator="\n")
        if new:
            w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
