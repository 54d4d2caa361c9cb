"""Numeric right-hand sides of the generalization bounds.

All three bounds share the complexity term

    c * rho * (ln m + 1) * R*

with c = 4B for squared loss on [-B, B] and R* the subset-max empirical
Rademacher complexity of the local linear class, evaluated through its
closed-form bound alpha * max_i ||x~_i|| / sqrt(m) (x~ = intercept-augmented row).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .rho import RhoEstimate

# (theorem id) -> multipliers for (trainMse, mnfTest, mnfTrainAvg, trainMnf), complexity c/B, confidence
THEOREMS = {
    "thm1-full": {"trainMse": 4.0, "mnfTest": 2.0, "mnfTrainAvg": 4.0, "complexity_per_B": 16.0, "confidence": 2.0},
    "thm-alt-g": {"trainMse": 2.0, "mnfTrainAvg": 2.0, "complexity_per_B": 8.0, "confidence": 1.0},
    "thm2-full": {"trainMnf": 1.0, "complexity_per_B": 8.0, "confidence": 1.0},
}


@dataclass(frozen=True)
class ComplexityBound:
    alpha: float
    max_norm: float
    m: int
    r_star: float


def rademacher_star_linear(sample: Dataset | np.ndarray, alpha: float) -> ComplexityBound:
    """alpha * max_i ||(1, x_i)||_2 / sqrt(m)."""
    X = sample.features if isinstance(sample, Dataset) else np.atleast_2d(np.asarray(sample, dtype=float))
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    m = X.shape[0]
    if m < 1:
        raise ValueError("sample is empty")
    max_norm = float(np.sqrt(1.0 + np.max(np.sum(X ** 2, axis=1))))
    return ComplexityBound(float(alpha), max_norm, m, float(alpha) * max_norm / math.sqrt(m))


def measured_alpha(coefficients) -> float:
    """Largest l2 norm among fitted explanation coefficient vectors (intercept included)."""
    C = np.atleast_2d(np.asarray(coefficients, dtype=float))
    C = C[np.all(np.isfinite(C), axis=1)]
    if C.size == 0:
        raise ValueError("no finite coefficient vectors")
    return float(np.max(np.linalg.norm(C, axis=1)))


def lemma1_complexity_term(c: float, rho: RhoEstimate | float, r_star: ComplexityBound | float, m: int) -> float:
    """c * rho * (ln m + 1) * R*."""
    if not c > 0:
        raise ValueError("c must be positive")
    rho_v = rho.value if isinstance(rho, RhoEstimate) else float(rho)
    r = r_star.r_star if isinstance(r_star, ComplexityBound) else float(r_star)
    return c * rho_v * (math.log(m) + 1.0) * r


def confidence_term(m: int, delta: float) -> float:
    """sqrt(ln(1/delta) / m)."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(math.log(1.0 / delta) / m)


@dataclass
class BoundReport:
    theorem: str
    terms: dict
    rhs: float
    delta: float
    B: float
    rho: dict
    m: int
    lhs_estimate: float = float("nan")
    lhs_std_error: float = 0.0
    provenance: dict = field(default_factory=dict)

    def recompute_rhs(self) -> float:
        return combine(self.theorem, self.terms)

    def holds(self, n_se: float = 3.0) -> bool:
        return self.rhs >= self.lhs_estimate - n_se * self.lhs_std_error

    def to_json(self) -> str:
        d = asdict(self)
        d["verdict"] = bool(self.holds()) if math.isfinite(self.lhs_estimate) else None
        return json.dumps(json_safe(d), sort_keys=True, indent=2)


def json_safe(obj):
    """Copy with NaN/inf as None and numpy scalars as Python numbers."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def combine(theorem: str, terms: dict) -> float:
    """Recombine stored terms into the theorem's right-hand side."""
    coeffs = THEOREMS[theorem]
    total = 0.0
    for name in ("trainMse", "mnfTest", "mnfTrainAvg", "trainMnf"):
        if name in coeffs:
            total += coeffs[name] * terms[name]
    return total + terms["complexityTerm"] + terms["confidenceTerm"]


def _report(theorem, terms_in, B, rho, r_star, m, delta, provenance=None) -> BoundReport:
    for k, v in terms_in.items():
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"term {k} must be finite and nonnegative, got {v}")
    if not B > 0:
        raise ValueError("B must be positive")
    coeffs = THEOREMS[theorem]
    terms = dict(terms_in)
    terms["complexityTerm"] = lemma1_complexity_term(coeffs["complexity_per_B"] * B, rho, r_star, m)
    terms["confidenceTerm"] = coeffs["confidence"] * confidence_term(m, delta)
    rho_d = rho.as_dict() if isinstance(rho, RhoEstimate) else {"value": float(rho)}
    prov = dict(provenance or {})
    if isinstance(r_star, ComplexityBound):
        prov.setdefault("complexity", asdict(r_star))
    return BoundReport(theorem, terms, combine(theorem, terms), delta, float(B), rho_d, int(m), provenance=prov)


def theorem1_rhs(train_mse, mnf_test, mnf_train_avg, B, rho, r_star, m, delta, provenance=None) -> BoundReport:
    """Bound on the test MSE of f:
    4 trainMSE + 2 MNF(f,g) + 4 avg_i MNF(f,g,x_i) + 16 B rho R* (ln m + 1) + 2 sqrt(ln(1/delta)/m).
    """
    return _report("thm1-full", {"trainMse": train_mse, "mnfTest": mnf_test, "mnfTrainAvg": mnf_train_avg},
                   B, rho, r_star, m, delta, provenance)


def theorem2_rhs(train_mnf, B, rho, r_star, m, delta, provenance=None) -> BoundReport:
    """Bound on test MNF for a fixed f: train MNF + 8 B rho R* (ln m + 1) + sqrt(ln(1/delta)/m)."""
    return _report("thm2-full", {"trainMnf": train_mnf}, B, rho, r_star, m, delta, provenance)


def theorem_alt_g_rhs(train_mse, mnf_train_avg, B, rho, r_star, m, delta, provenance=None) -> BoundReport:
    """Bound on the test error of the explanations themselves, needing no unlabeled test data:
    2 trainMSE + 2 avg_i MNF(f,g,x_i) + 8 B rho R* (ln m + 1) + sqrt(ln(1/delta)/m).
    """
    return _report("thm-alt-g", {"trainMse": train_mse, "mnfTrainAvg": mnf_train_avg},
                   B, rho, r_star, m, delta, provenance)
