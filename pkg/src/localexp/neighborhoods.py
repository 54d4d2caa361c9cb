"""Neighborhood distributions around anchor points.

Densities are always handled in log space; a density vector over ``m``
anchors is a row of log-densities.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .data import Dataset

ATOM_TOL = 1e-12

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _as_matrix(points) -> np.ndarray:
    if isinstance(points, Dataset):
        return points.features
    A = np.asarray(points, dtype=float)
    return A[None, :] if A.ndim == 1 else A


class NeighborhoodFamily:
    """Base class. ``kind`` is one of gaussian-isotropic, discrete-uniform, point-mass."""

    kind: str = ""
    has_density = True

    def log_density(self, anchor, query) -> float:
        anchor = np.asarray(anchor, dtype=float)
        query = np.asarray(query, dtype=float)
        self._check_dim(anchor)
        self._check_dim(query)
        return float(self.log_density_matrix(anchor[None, :], query[None, :])[0, 0])

    def log_density_vector(self, anchors, query) -> np.ndarray:
        """``log p_{N(x_i)}(query)`` for every anchor row, shape ``(m,)``."""
        q = np.asarray(query, dtype=float)
        return self.log_density_matrix(anchors, q[None, :])[0]

    def log_density_matrix(self, anchors, queries) -> np.ndarray:
        """Log-densities of shape ``(n_queries, m_anchors)``."""
        raise NotImplementedError

    def sample(self, anchor, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw from the neighborhood of ``anchor``; ``size`` adds a leading axis."""
        anchor = np.asarray(anchor, dtype=float)
        self._check_dim(anchor)
        n = 1 if size is None else size
        out = self.sample_rows(anchor[None, :], np.zeros(n, dtype=int), rng)
        return out[0] if size is None else out

    def sample_rows(self, anchors, idx, rng: np.random.Generator) -> np.ndarray:
        """One draw from the neighborhood of ``anchors[idx[j]]`` for each j."""
        raise NotImplementedError

    def _check_dim(self, v: np.ndarray):
        d = getattr(self, "dimension", None)
        if d is not None and v.shape[-1] != d:
            raise ValueError(f"dimension mismatch: expected {d}, got {v.shape[-1]}")

    def config(self) -> dict:
        return {"kind": self.kind}


class GaussianNeighborhood(NeighborhoodFamily):
    """Isotropic Gaussian ``N(x, sigma^2 I)``; sigma is the per-coordinate std.

    Symmetric in anchor/query, so the neighborhood and its mirror coincide.
    """

    kind = "gaussian-isotropic"

    def __init__(self, sigma: float, dimension: int | None = None):
        sigma = float(sigma)
        if not sigma > 0 or not math.isfinite(sigma):
            raise ValueError(f"sigma must be positive and finite, got {sigma}")
        self.sigma = sigma
        self.dimension = dimension

    def __repr__(self):
        return f"GaussianNeighborhood(sigma={self.sigma!r})"

    def log_density_matrix(self, anchors, queries) -> np.ndarray:
        A = _as_matrix(anchors)
        Q = _as_matrix(queries)
        if A.shape[1] != Q.shape[1]:
            raise ValueError(f"dimension mismatch: anchors {A.shape[1]}, queries {Q.shape[1]}")
        m, d = A.shape
        sq = np.empty((Q.shape[0], m))
        step = max(1, 2_000_000 // (m * d))
        for s in range(0, Q.shape[0], step):
            diff = Q[s:s + step, None, :] - A[None, :, :]
            sq[s:s + step] = np.einsum("qmk,qmk->qm", diff, diff)
        return -d * (math.log(self.sigma) + LOG_SQRT_2PI) - sq / (2.0 * self.sigma ** 2)

    def sample_rows(self, anchors, idx, rng):
        A = _as_matrix(anchors)
        idx = np.asarray(idx, dtype=int)
        return A[idx] + self.sigma * rng.standard_normal((idx.shape[0], A.shape[1]))

    def config(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}


class DiscreteUniformNeighborhood(NeighborhoodFamily):
    """Uniform distribution over a finite atom set attached to each anchor.

    ``anchors`` (m x d) identifies which support belongs to which anchor;
    lookups match anchor rows exactly (within ``ATOM_TOL``).
    """

    kind = "discrete-uniform"

    def __init__(self, anchors, supports: Sequence):
        self.anchors = _as_matrix(anchors).copy()
        self.dimension = self.anchors.shape[1]
        if len(supports) != self.anchors.shape[0]:
            raise ValueError("need exactly one support set per anchor")
        self.supports = []
        for s in supports:
            S = np.asarray(s, dtype=float)
            if S.ndim == 1:
                S = S[:, None] if self.dimension == 1 else S[None, :]
            if S.shape[0] == 0:
                raise ValueError("support sets must be non-empty")
            if S.shape[1] != self.dimension:
                raise ValueError("support atoms must match anchor dimension")
            self.supports.append(S)

    def __repr__(self):
        return f"DiscreteUniformNeighborhood(m={len(self.supports)})"

    def anchor_index(self, anchor) -> int:
        a = np.asarray(anchor, dtype=float)
        hit = np.flatnonzero(np.all(np.abs(self.anchors - a) <= ATOM_TOL, axis=1))
        if hit.size == 0:
            raise ValueError(f"{a} is not an anchor of this family")
        return int(hit[0])

    def atoms(self) -> np.ndarray:
        """Union of all supports, duplicates (within tolerance) removed."""
        allatoms = np.concatenate(self.supports, axis=0)
        rows = allatoms[np.lexsort(allatoms.T[::-1])]
        new = np.ones(rows.shape[0], dtype=bool)
        new[1:] = np.any(np.abs(np.diff(rows, axis=0)) > ATOM_TOL, axis=1)
        return rows[new]

    def log_density_matrix(self, anchors, queries) -> np.ndarray:
        A = _as_matrix(anchors)
        Q = _as_matrix(queries)
        out = np.full((Q.shape[0], A.shape[0]), -np.inf)
        for j, a in enumerate(A):
            S = self.supports[self.anchor_index(a)]
            member = np.zeros(Q.shape[0], dtype=bool)
            for s in range(0, S.shape[0], 256):
                member |= np.all(np.abs(Q[:, None, :] - S[None, s:s + 256, :]) <= ATOM_TOL, axis=2).any(axis=1)
            out[member, j] = -math.log(S.shape[0])
        return out

    def sample_rows(self, anchors, idx, rng):
        A = _as_matrix(anchors)
        idx = np.asarray(idx, dtype=int)
        out = np.empty((idx.shape[0], self.dimension))
        for j, i in enumerate(idx):
            S = self.supports[self.anchor_index(A[i])]
            out[j] = S[rng.integers(S.shape[0])]
        return out


class PointMassNeighborhood(NeighborhoodFamily):
    """Degenerate neighborhood at the anchor itself; sampling only."""

    kind = "point-mass"
    has_density = False

    def __init__(self, dimension: int | None = None):
        self.dimension = dimension

    def log_density_matrix(self, anchors, queries):
        raise ValueError("point-mass neighborhoods have no density")

    def log_density(self, anchor, query):
        raise ValueError("point-mass neighborhoods have no density")

    def sample_rows(self, anchors, idx, rng):
        A = _as_matrix(anchors)
        return A[np.asarray(idx, dtype=int)].copy()


def from_config(cfg: dict) -> NeighborhoodFamily:
    kind = cfg.get("kind", "gaussian-isotropic")
    if kind == "gaussian-isotropic":
        return GaussianNeighborhood(float(cfg["sigma"]))
    if kind == "point-mass":
        return PointMassNeighborhood()
    raise ValueError(f"cannot build neighborhood kind {kind!r} from a flat config")
