"""Disjointedness factor of a set of anchor neighborhoods.

    rho = integral over x' of sqrt( (1/m) * sum_i p_i(x')^2 )

where p_i is the density of the neighborhood of anchor i.  rho is 1 when
all neighborhoods coincide and sqrt(m) when they are pairwise disjoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import logsumexp

from .data import Dataset
from .neighborhoods import DiscreteUniformNeighborhood, GaussianNeighborhood, NeighborhoodFamily


@dataclass(frozen=True)
class RhoEstimate:
    value: float
    method: str
    m: int
    n_samples: int = 0
    delta: float = float("nan")
    hoeffding_epsilon: float = 0.0
    std_error: float = 0.0
    ratios: np.ndarray | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "m": self.m,
            "n_samples": self.n_samples,
            "delta": self.delta,
            "hoeffding_epsilon": self.hoeffding_epsilon,
            "std_error": self.std_error,
        }


def hoeffding_epsilon(m: int, n: int, delta: float) -> float:
    """Deviation t with P(|rho_hat - rho| > t) <= delta, from 2 exp(-2 n t^2 / m)."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.sqrt(m * math.log(2.0 / delta) / (2.0 * n))


def hoeffding_tail(m: int, n: int, t: float) -> float:
    """Upper bound 2 exp(-2 n t^2 / m) on P(|rho_hat - rho| > t)."""
    return 2.0 * math.exp(-2.0 * n * t * t / m)


def _anchors(a) -> np.ndarray:
    return a.features if isinstance(a, Dataset) else np.atleast_2d(np.asarray(a, dtype=float))


def norm_ratio(logp: np.ndarray) -> np.ndarray:
    """sqrt(m) * ||p||_2 / ||p||_1 per row of log-densities, in [1, sqrt(m)].

    Rows with every entry -inf give NaN.
    """
    logp = np.atleast_2d(logp)
    m = logp.shape[1]
    l1 = logsumexp(logp, axis=1)
    l2 = 0.5 * logsumexp(2.0 * logp, axis=1)
    with np.errstate(invalid="ignore"):
        r = math.sqrt(m) * np.exp(l2 - l1)
    # the bounds hold exactly; clip only rounding in the last ulp
    return np.clip(r, 1.0, math.sqrt(m))


def rho_exact_discrete(anchors, family: DiscreteUniformNeighborhood) -> RhoEstimate:
    """Exact sum over the atom universe."""
    A = _anchors(anchors)
    m = A.shape[0]
    U = family.atoms()
    P = np.exp(family.log_density_matrix(A, U))  # (atoms, m)
    value = float(np.sum(np.sqrt(np.sum(P ** 2, axis=1) / m)))
    return RhoEstimate(value, "exact-discrete", m)


def rho_mc_expectation_discrete(anchors, family: DiscreteUniformNeighborhood) -> float:
    """Expected Monte-Carlo ratio, enumerating every (anchor, atom) outcome with its probability."""
    A = _anchors(anchors)
    m = A.shape[0]
    total = 0.0
    for i in range(m):
        S = family.supports[family.anchor_index(A[i])]
        r = norm_ratio(family.log_density_matrix(A, S))
        total += float(np.sum(r)) / (m * S.shape[0])
    return total


def rho_quadrature(anchors, family: GaussianNeighborhood, grid_half_width_sigmas: float = 8.0,
                   points_per_axis: int | None = None) -> RhoEstimate:
    """Trapezoid rule over the anchors' bounding box padded by a multiple of sigma (d <= 2)."""
    A = _anchors(anchors)
    m, d = A.shape
    if d > 2:
        raise ValueError("quadrature is only supported for d <= 2")
    if not isinstance(family, GaussianNeighborhood):
        raise ValueError("quadrature needs a gaussian neighborhood")
    n = points_per_axis or (512 if d == 1 else 256)
    if n < 64:
        raise ValueError("points_per_axis must be >= 64")
    pad = grid_half_width_sigmas * family.sigma
    axes = [np.linspace(A[:, k].min() - pad, A[:, k].max() + pad, n) for k in range(d)]
    if d == 1:
        Q = axes[0][:, None]
    else:
        g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
        Q = np.column_stack([g0.ravel(), g1.ravel()])
    L = family.log_density_matrix(A, Q)
    integrand = np.exp(0.5 * (logsumexp(2.0 * L, axis=1) - math.log(m)))
    if d == 1:
        value = trapezoid(integrand, axes[0])
    else:
        value = trapezoid(trapezoid(integrand.reshape(n, n), axes[1], axis=1), axes[0])
    return RhoEstimate(float(value), "quadrature", m, n_samples=Q.shape[0])


def rho_monte_carlo(anchors, family: NeighborhoodFamily, n_samples: int | None = None,
                    delta: float = 0.01, rng: np.random.Generator | int | None = None,
                    keep_ratios: bool = False, chunk: int = 8192) -> RhoEstimate:
    """Importance-sampling estimate with the uniform mixture of neighborhoods as proposal.

    Each draw picks an anchor uniformly, samples x' from its neighborhood and
    scores sqrt(m) ||p(x')||_2 / ||p(x')||_1.  Default ``n_samples`` is 10 m.
    """
    if not family.has_density:
        raise ValueError(f"{family.kind} neighborhoods have no density")
    A = _anchors(anchors)
    m = A.shape[0]
    n = 10 * m if n_samples is None else int(n_samples)
    if n < 1:
        raise ValueError("n_samples must be >= 1")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    idx = rng.integers(0, m, size=n)
    ratios = np.empty(n)
    for s in range(0, n, chunk):
        Xs = family.sample_rows(A, idx[s:s + chunk], rng)
        ratios[s:s + chunk] = norm_ratio(family.log_density_matrix(A, Xs))
    value = float(np.mean(ratios))
    se = float(np.std(ratios, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return RhoEstimate(value, "monte-carlo", m, n, delta, hoeffding_epsilon(m, n, delta), se,
                       ratios if keep_ratios else None)


def fit_growth_exponent(ms, rhos) -> tuple[float, float, float]:
    """Least-squares line of ln(rho) on ln(m): ``(slope, intercept, r_squared)``."""
    x = np.log(np.asarray(ms, dtype=float))
    y = np.log(np.asarray(rhos, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / tss if tss > 0 else 1.0
    return float(slope), float(intercept), r2


@dataclass(frozen=True)
class GrowthResult:
    exponent: float
    intercept: float
    r_squared: float
    table: list[dict]


def rho_growth_exponent(data, family: NeighborhoodFamily, m_grid, repeats: int = 5,
                        samples_per_m: int = 10, seed: int = 0, delta: float = 0.01) -> GrowthResult:
    """Fit rho ~ m^exponent by averaging MC estimates over random subsamples.

    For each m, ``repeats`` uniform subsamples of m rows are drawn without
    replacement and each is scored with ``samples_per_m * m`` MC draws.
    """
    X = _anchors(data)
    ms = [int(v) for v in m_grid]
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ValueError("m_grid must be strictly increasing")
    if ms[0] < 1 or ms[-1] > X.shape[0]:
        raise ValueError(f"m_grid values must lie in [1, {X.shape[0]}]")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    table = []
    for k, m in enumerate(ms):
        vals, ses = [], []
        for r in range(repeats):
            rng = np.random.default_rng([int(seed), k, r])
            sub = X[np.sort(rng.choice(X.shape[0], size=m, replace=False))]
            est = rho_monte_carlo(sub, family, samples_per_m * m, delta, rng)
            vals.append(est.value)
            ses.append(est.std_error)
        table.append({
            "m": m,
            "rho": float(np.mean(vals)),
            "std_error": float(math.sqrt(np.sum(np.square(ses))) / repeats),
            "sigma": float(getattr(family, "sigma", float("nan"))),
            "seed": int(seed),
        })
    slope, intercept, r2 = fit_growth_exponent([t["m"] for t in table], [t["rho"] for t in table])
    return GrowthResult(slope, intercept, r2, table)
