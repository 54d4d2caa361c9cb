"""Local affine explanations ``g_{x'}(x) = b + w . x`` fitted around a source point x'.

Two explainers:

* ``mnf-wls`` -- weighted least squares of f over the *real* sample, each
  sample row weighted by the density of the source point under that row's
  neighborhood.  This is the per-source minimizer of empirical mirrored
  neighborhood fidelity.
* ``nf-sampling`` -- ordinary least squares of f on synthetic points drawn
  around the source (LIME-style neighborhood fidelity).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import DegenerateWeightsError, SingularSystemError
from .models import RegressionModel
from .neighborhoods import NeighborhoodFamily

DEFAULT_RIDGE = 1e-8
# ridge-0 systems above this condition number count as singular
SINGULAR_COND = 1e12


@dataclass(frozen=True)
class LocalLinearModel:
    weights: np.ndarray
    intercept: float
    source: np.ndarray
    effective_weight_mass: float = 1.0

    def __call__(self, x):
        return explain_at(self, x)

    @property
    def coefficients(self) -> np.ndarray:
        """Intercept followed by feature weights."""
        return np.concatenate([[self.intercept], self.weights])


def explain_at(g: LocalLinearModel, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != g.weights.shape[0]:
        raise ValueError(f"dimension mismatch: explanation has {g.weights.shape[0]} features, got {x.shape[-1]}")
    out = x @ g.weights + g.intercept
    return float(out) if np.ndim(out) == 0 else out


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _penalty(p: int, ridge: float) -> np.ndarray:
    P = ridge * np.eye(p)
    P[0, 0] = 0.0  # intercept is not penalized
    return P


def _solve_normal(G: np.ndarray, rhs: np.ndarray, ridge: float, on_singular: str) -> np.ndarray:
    """Solve a stack of normal systems ``G b = rhs``.

    With ``ridge > 0`` the systems are positive definite.  With ``ridge == 0``
    rank-deficient systems either raise or fall back to the minimum-norm
    solution (the ridge -> 0+ limit).
    """
    if ridge == 0:
        cond = np.linalg.cond(G)
        bad = ~(cond < SINGULAR_COND)
        if bad.any():
            if on_singular == "raise":
                raise SingularSystemError(
                    "weighted normal equations are singular with ridge 0; use ridge > 0"
                )
            out = np.empty_like(rhs)
            good = ~bad
            if good.any():
                out[good] = np.linalg.solve(G[good], rhs[good][..., None])[..., 0]
            out[bad] = np.einsum("nij,nj->ni", np.linalg.pinv(G[bad], hermitian=True), rhs[bad])
            return out
    return np.linalg.solve(G, rhs[..., None])[..., 0]


class ExplanationSystem:
    """Rule mapping any source point x' to a local explanation g_{x'}.

    The black-box predictions on the training sample are cached at
    construction; build a new system if the model changes.
    """

    def __init__(self, model: RegressionModel, neighborhood: NeighborhoodFamily,
                 training_sample: Dataset | np.ndarray | None = None, kind: str = "mnf-wls",
                 ridge: float = DEFAULT_RIDGE, nf_samples: int = 1000, on_singular: str = "raise",
                 seed: int = 0):
        if kind not in ("mnf-wls", "nf-sampling"):
            raise ValueError(f"unknown explainer kind {kind!r}")
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if on_singular not in ("raise", "pinv"):
            raise ValueError("on_singular must be 'raise' or 'pinv'")
        self.model = model
        self.neighborhood = neighborhood
        self.kind = kind
        self.ridge = float(ridge)
        self.nf_samples = int(nf_samples)
        self.on_singular = on_singular
        self.seed = seed
        if kind == "mnf-wls":
            if training_sample is None:
                raise ValueError("mnf-wls needs a training sample")
            if not neighborhood.has_density:
                raise ValueError(f"{neighborhood.kind} neighborhoods have no density")
            X = training_sample.features if isinstance(training_sample, Dataset) else np.asarray(
                training_sample, dtype=float)
            self.X = np.atleast_2d(X)
            self.fx = np.asarray(model.predict(self.X), dtype=float)
            self._Xt = _augment(self.X)
            p = self._Xt.shape[1]
            self._outer = np.einsum("mi,mj->mij", self._Xt, self._Xt).reshape(len(self.X), p * p)
        else:
            self.X = None
            self.fx = None

    @property
    def d(self) -> int:
        return self.X.shape[1] if self.X is not None else self.model.dimension

    def fit(self, source, rng: np.random.Generator | None = None) -> LocalLinearModel:
        source = np.asarray(source, dtype=float)
        if self.kind == "mnf-wls":
            coef, mass, ok = self.fit_batch(source[None, :])
            if not ok[0]:
                raise DegenerateWeightsError(
                    f"all regression weights vanish at source {source}; it lies outside every neighborhood"
                )
            return LocalLinearModel(coef[0, 1:].copy(), float(coef[0, 0]), source.copy(), float(mass[0]))
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        return fit_nf_explainer(self.model, self.neighborhood, source, self.nf_samples, self.ridge, rng)

    def weights_at(self, sources) -> tuple[np.ndarray, np.ndarray]:
        """Max-normalized regression weights ``(n_sources, m)`` and a validity mask."""
        L = self.neighborhood.log_density_matrix(self.X, np.atleast_2d(sources))
        top = L.max(axis=1)
        ok = np.isfinite(top)
        W = np.zeros_like(L)
        W[ok] = np.exp(L[ok] - top[ok, None])
        return W, ok

    def fit_batch(self, sources, chunk: int = 4096):
        """Fit the MNF explainer at many sources at once.

        Returns ``(coef, mass, ok)``: coefficients ``(n, d+1)`` with the
        intercept first, the summed normalized weights, and a mask that is
        False where every weight vanished (coefficients there are NaN).
        """
        if self.kind != "mnf-wls":
            raise ValueError("fit_batch is only available for mnf-wls")
        S = np.atleast_2d(np.asarray(sources, dtype=float))
        n, p = S.shape[0], self._Xt.shape[1]
        coef = np.full((n, p), np.nan)
        mass = np.zeros(n)
        okall = np.zeros(n, dtype=bool)
        P = _penalty(p, self.ridge)
        for s in range(0, n, chunk):
            W, ok = self.weights_at(S[s:s + chunk])
            mass[s:s + chunk] = W.sum(axis=1)
            ok &= mass[s:s + chunk] >= 1e-300
            okall[s:s + chunk] = ok
            if not ok.any():
                continue
            Wk = W[ok]
            G = (Wk @ self._outer).reshape(-1, p, p) + P
            rhs = (Wk * self.fx) @ self._Xt
            idx = np.flatnonzero(ok) + s
            coef[idx] = _solve_normal(G, rhs, self.ridge, self.on_singular)
        return coef, mass, okall

    def fit_many(self, sources, rng: np.random.Generator | None = None) -> list[LocalLinearModel]:
        S = np.atleast_2d(np.asarray(sources, dtype=float))
        if self.kind == "nf-sampling":
            rng = rng if rng is not None else np.random.default_rng(self.seed)
            return [self.fit(s, rng) for s in S]
        coef, mass, ok = self.fit_batch(S)
        if not ok.all():
            raise DegenerateWeightsError(f"degenerate weights at {int((~ok).sum())} source points")
        return [LocalLinearModel(c[1:].copy(), float(c[0]), s.copy(), float(w)) for c, s, w in zip(coef, S, mass)]


def fit_mnf_explainer(system: ExplanationSystem, source) -> LocalLinearModel:
    """Weighted least squares minimizing the empirical MNF integrand at ``source``."""
    if system.kind != "mnf-wls":
        raise ValueError("system is not an mnf-wls explainer")
    return system.fit(source)


def fit_nf_explainer(model: RegressionModel, neighborhood: NeighborhoodFamily, source, n_samples: int,
                     ridge: float, rng: np.random.Generator) -> LocalLinearModel:
    """Least-squares fit of ``model`` on ``n_samples`` draws from the source's neighborhood."""
    source = np.asarray(source, dtype=float)
    d = source.shape[0]
    if n_samples < d + 1:
        raise ValueError(f"need at least d + 1 = {d + 1} samples, got {n_samples}")
    Z = neighborhood.sample(source, rng, size=n_samples)
    y = np.asarray(model.predict(Z), dtype=float)
    Xt = _augment(Z)
    G = (Xt.T @ Xt + _penalty(d + 1, ridge))[None]
    coef = _solve_normal(G, (Xt.T @ y)[None], ridge, "raise")[0]
    return LocalLinearModel(coef[1:], float(coef[0]), source.copy(), float(n_samples))


def solve_wls(X, y, weights, ridge: float = 0.0, on_singular: str = "raise") -> np.ndarray:
    """Minimize ``sum_i w_i (y_i - b - w.x_i)^2 + ridge ||w||^2``; returns ``[b, w]``."""
    Xt = _augment(np.atleast_2d(np.asarray(X, dtype=float)))
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be nonnegative and not all zero")
    G = (Xt.T * w) @ Xt + _penalty(Xt.shape[1], ridge)
    return _solve_normal(G[None], ((w * np.asarray(y, dtype=float)) @ Xt)[None], ridge, on_singular)[0]


def global_linear_fit(model: RegressionModel, X) -> LocalLinearModel:
    """Unweighted least-squares fit of f on X: the wide-neighborhood limit of every g_{x'}."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xt = _augment(X)
    coef, *_ = np.linalg.lstsq(Xt, model.predict(X), rcond=None)
    return LocalLinearModel(coef[1:], float(coef[0]), np.full(X.shape[1], np.nan), float(X.shape[0]))


def write_explanations(explanations, path) -> None:
    """CSV with source coordinates, intercept, weights and weight mass per row."""
    explanations = list(explanations)
    if not explanations:
        raise ValueError("no explanations to write")
    d = explanations[0].weights.shape[0]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"source_{j + 1}" for j in range(d)] + ["intercept"]
                   + [f"w_{j + 1}" for j in range(d)] + ["effective_weight_mass"])
        for g in explanations:
            w.writerow([repr(float(v)) for v in g.source] + [repr(g.intercept)]
                       + [repr(float(v)) for v in g.weights] + [repr(g.effective_weight_mass)])
