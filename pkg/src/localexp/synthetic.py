"""Analytic toy constructions with known optima and known rho."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError
from .models import FunctionModel
from .neighborhoods import DiscreteUniformNeighborhood

KINDS = ("beta-manifold", "correlated-3d", "uniform-overlap")


@dataclass(frozen=True)
class ToyManifoldSpec:
    kind: str
    m: int = 100
    beta: float = 5.0
    M: int | None = None
    k: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown toy kind {self.kind!r}; choose from {KINDS}")
        if self.m < 1:
            raise DataError("m must be >= 1")
        if self.kind == "uniform-overlap":
            overlap_layout(self.m, self.k, self.M if self.M is not None else self.m)


def _int_power(m: int, e: float) -> int:
    v = m ** e
    r = round(v)
    if r < 1 or abs(v - r) > 1e-9 * max(1.0, v):
        raise DataError(f"m^{e} = {v} is not a positive integer")
    return int(r)


def overlap_layout(m: int, k: float, M: int) -> tuple[int, int, int]:
    """Validate a uniform-overlap universe; return (support size, stride, coverage).

    Each of the m neighborhoods covers ``M / m^(1-k)`` consecutive atoms
    (cyclically), starting ``M / m`` atoms after the previous one, so every
    atom lies in exactly ``m^k`` neighborhoods.
    """
    if not 0 <= k <= 1:
        raise DataError("overlap exponent k must lie in [0, 1]")
    parts = _int_power(m, 1 - k)
    if M % parts:
        raise DataError(f"M = {M} must be divisible by m^(1-k) = {parts}")
    if M % m:
        raise DataError(f"M = {M} must be divisible by m = {m} for the circulant layout")
    size = M // parts
    stride = M // m
    return size, stride, size // stride


def beta_manifold_function(beta: float) -> FunctionModel:
    """f(x) = x1 - beta * x1 * x2^2, which equals x1 on the manifold x2 = 0."""
    def f(X):
        return X[:, 0] - beta * X[:, 0] * X[:, 1] ** 2
    return FunctionModel(f, 2, name=f"x1 - {beta}*x1*x2^2")


def generate(spec: ToyManifoldSpec):
    """Return ``(data, model)``; for uniform-overlap ``model`` is the discrete neighborhood family."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "beta-manifold":
        x1 = rng.standard_normal(spec.m)
        X = np.column_stack([x1, np.zeros(spec.m)])
        f = beta_manifold_function(spec.beta)
        return Dataset(X, f.predict(X), name="beta-manifold"), f
    if spec.kind == "correlated-3d":
        x1 = rng.standard_normal(spec.m)
        X = np.column_stack([x1, np.zeros(spec.m), x1])
        f = FunctionModel(lambda A: A[:, 0], 3, name="x1")
        return Dataset(X, f.predict(X), name="correlated-3d"), f
    M = spec.M if spec.M is not None else spec.m
    size, stride, _ = overlap_layout(spec.m, spec.k, M)
    universe = np.arange(M, dtype=float)[:, None]
    starts = np.arange(spec.m) * stride
    anchors = universe[starts]
    supports = [universe[(s + np.arange(size)) % M] for s in starts]
    family = DiscreteUniformNeighborhood(anchors, supports)
    return Dataset(anchors, name="uniform-overlap"), family


def analytic_optima(spec: ToyManifoldSpec) -> dict:
    """Optimal x1-weights on the beta-manifold toy.

    The NF optimum uses a standard normal neighborhood centred at the origin;
    the MNF optimum is exact recovery of f on the manifold.
    """
    if spec.kind != "beta-manifold":
        raise DataError("analytic optima are only defined for beta-manifold")
    return {"nfOptimalW1": 1.0 - spec.beta, "mnfOptimalW1": 1.0}


def correlated_explanations() -> dict:
    """Three affine explanations that agree on the (x1, 0, x1) manifold: (intercept, weights)."""
    return {
        "x1": (0.0, np.array([1.0, 0.0, 0.0])),
        "x3": (0.0, np.array([0.0, 0.0, 1.0])),
        "-x1+2x3": (0.0, np.array([-1.0, 0.0, 2.0])),
    }
