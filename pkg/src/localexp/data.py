"""Tabular datasets: CSV ingestion, standardization, splits and distance ranges."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with optional targets.

    ``feature_means``/``feature_stds`` record the standardization that was
    applied (zeros/ones for raw data) so it can be inverted or replayed on
    new rows.
    """

    features: np.ndarray
    targets: np.ndarray | None = None
    feature_means: np.ndarray | None = None
    feature_stds: np.ndarray | None = None
    name: str = "data"
    feature_names: tuple[str, ...] = ()
    target_name: str = "y"
    standardized: bool = False
    target_mean: float = 0.0
    target_std: float = 1.0

    def __post_init__(self):
        X = np.array(self.features, dtype=float, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        X.setflags(write=False)
        object.__setattr__(self, "features", X)
        m, d = X.shape
        if self.targets is not None:
            y = np.array(self.targets, dtype=float, copy=True).reshape(-1)
            if y.shape[0] != m:
                raise DataError(f"targets have length {y.shape[0]}, expected {m}")
            y.setflags(write=False)
            object.__setattr__(self, "targets", y)
        for attr, default in (("feature_means", 0.0), ("feature_stds", 1.0)):
            v = getattr(self, attr)
            v = np.full(d, default) if v is None else np.array(v, dtype=float).reshape(-1)
            if v.shape[0] != d:
                raise DataError(f"{attr} has length {v.shape[0]}, expected {d}")
            v.setflags(write=False)
            object.__setattr__(self, attr, v)
        if np.any(self.feature_stds <= 0):
            raise DataError("feature_stds must be strictly positive")
        if not self.feature_names:
            object.__setattr__(self, "feature_names", tuple(f"x{j + 1}" for j in range(d)))
        elif len(self.feature_names) != d:
            raise DataError("feature_names length does not match feature count")

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def require_targets(self) -> np.ndarray:
        if self.targets is None:
            raise DataError(f"dataset {self.name!r} has no targets")
        return self.targets

    def subset(self, idx, name: str | None = None) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return replace(
            self,
            features=self.features[idx],
            targets=None if self.targets is None else self.targets[idx],
            name=name or self.name,
        )

    def transform(self, X) -> np.ndarray:
        """Apply the recorded standardization to raw feature rows."""
        X = np.asarray(X, dtype=float)
        return (X - self.feature_means) / self.feature_stds

    def raw_features(self) -> np.ndarray:
        return self.features * self.feature_stds + self.feature_means

    def raw_targets(self) -> np.ndarray | None:
        if self.targets is None:
            return None
        return self.targets * self.target_std + self.target_mean


def load_csv(path, target_column: str | int | None, name: str | None = None) -> Dataset:
    """Read a headed, comma-delimited numeric CSV.

    ``target_column`` is a header name or a 0-based column index; ``None``
    loads every column as a feature.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if any(c.strip() for c in r)]

    seen = set()
    for h in header:
        if h in seen:
            raise DataError(f"{path}: duplicate header name {h!r}")
        seen.add(h)

    if target_column is None:
        t = None
    elif isinstance(target_column, int) or (isinstance(target_column, str) and target_column.isdigit()
                                             and target_column not in header):
        t = int(target_column)
        if not 0 <= t < len(header):
            raise DataError(f"unknown target column {target_column!r}")
    else:
        if target_column not in header:
            raise DataError(f"unknown target column {target_column!r}")
        t = header.index(target_column)

    if not rows:
        raise DataError(f"{path}: empty dataset (header only)")
    values = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} at row {i + 2}, column {header[j]!r}"
                ) from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite cell at row {i + 2}, column {header[j]!r}")
            values[i, j] = v

    feat_cols = [j for j in range(len(header)) if j != t]
    if not feat_cols:
        raise DataError(f"{path}: no feature columns")
    return Dataset(
        features=values[:, feat_cols],
        targets=None if t is None else values[:, t],
        name=name or path.stem,
        feature_names=tuple(header[j] for j in feat_cols),
        target_name="y" if t is None else header[t],
    )


def write_csv(data: Dataset, path, raw: bool = True) -> None:
    """Write ``data`` as CSV, target column last.

    With ``raw=True`` the recorded standardization is undone first so the
    file round-trips through :func:`load_csv`.
    """
    X = data.raw_features() if raw else data.features
    y = data.raw_targets() if raw else data.targets
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = list(data.feature_names)
        if y is not None:
            header.append(data.target_name)
        w.writerow(header)
        for i in range(data.m):
            row = [repr(float(v)) for v in X[i]]
            if y is not None:
                row.append(repr(float(y[i])))
            w.writerow(row)


def _column_moments(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = A.mean(axis=0)
    std = A.std(axis=0)  # population (1/m)
    # constant columns keep std 1 so they map to all zeros
    std = np.where(std > 0, std, 1.0)
    return mean, std


def standardize(data: Dataset, targets: bool = False) -> Dataset:
    """Shift/scale every feature column to mean 0 and population variance 1.

    The transform composes with any standardization already recorded on
    ``data`` so :meth:`Dataset.transform` keeps mapping raw rows correctly.
    Targets are left alone unless ``targets=True``.
    """
    if data.m < 2:
        raise DataError("standardize needs at least 2 rows")
    mean, std = _column_moments(data.features)
    X = (data.features - mean) / std
    out = replace(
        data,
        features=X,
        feature_means=data.feature_means + data.feature_stds * mean,
        feature_stds=data.feature_stds * std,
        standardized=True,
    )
    if targets and data.targets is not None:
        tm, ts = _column_moments(data.targets[:, None])
        out = replace(
            out,
            targets=(data.targets - tm[0]) / ts[0],
            target_mean=data.target_mean + data.target_std * tm[0],
            target_std=data.target_std * ts[0],
        )
    return out


@dataclass(frozen=True)
class SplitSpec:
    fractions: Sequence[float] = (0.5, 0.5)
    seed: int = 0

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if not fr or any(f <= 0 for f in fr):
            raise DataError("split fractions must be positive")
        if abs(math.fsum(fr) - 1.0) > 1e-12:
            raise DataError(f"split fractions sum to {math.fsum(fr)!r}, expected 1")
        object.__setattr__(self, "fractions", fr)


def split_indices(m: int, spec: SplitSpec) -> list[np.ndarray]:
    """Seeded permutation of ``range(m)`` sliced into contiguous parts.

    Part sizes are ``floor(f * m)``; leftover rows go one each to the parts
    with the largest fractional remainders (ties to the earlier part).
    """
    k = len(spec.fractions)
    if m < k:
        raise DataError(f"cannot split {m} rows into {k} parts")
    sizes = [math.floor(f * m) for f in spec.fractions]
    order = sorted(range(k), key=lambda j: (-(spec.fractions[j] * m - sizes[j]), j))
    for j in order[:m - sum(sizes)]:
        sizes[j] += 1
    if min(sizes) < 1:
        raise DataError(f"split would leave an empty part (sizes {sizes})")
    perm = np.random.default_rng(spec.seed).permutation(m)
    bounds = np.cumsum([0] + sizes)
    return [np.sort(perm[bounds[j]:bounds[j + 1]]) for j in range(k)]


def split(data: Dataset, spec: SplitSpec) -> list[Dataset]:
    parts = split_indices(data.m, spec)
    return [data.subset(idx, name=f"{data.name}[{j}]") for j, idx in enumerate(parts)]


def pairwise_distance_range(data: Dataset | np.ndarray, max_pairs: int = 2_000_000,
                            seed: int = 0) -> tuple[float, float]:
    """Smallest and largest Euclidean distance between distinct rows.

    Exact when all ``m(m-1)/2`` pairs fit in ``max_pairs``; otherwise the
    extremes over ``max_pairs`` uniformly drawn pairs (an approximation).
    """
    X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    m = X.shape[0]
    if m < 2:
        raise DataError("pairwise distances need at least 2 rows")
    n_pairs = m * (m - 1) // 2
    if n_pairs <= max_pairs:
        lo, hi = np.inf, 0.0
        # row blocks keep memory bounded
        block = max(1, 4_000_000 // m)
        for s in range(0, m, block):
            e = min(m, s + block)
            diff = X[s:e, None, :] - X[None, :, :]
            D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            iu = np.arange(s, e)[:, None] < np.arange(m)[None, :]
            if iu.any():
                vals = D[iu]
                lo = min(lo, float(vals.min()))
                hi = max(hi, float(vals.max()))
        return lo, hi
    rng = np.random.default_rng(seed)
    i = rng.integers(0, m, size=max_pairs)
    j = rng.integers(0, m - 1, size=max_pairs)
    j = np.where(j >= i, j + 1, j)
    D = np.linalg.norm(X[i] - X[j], axis=1)
    return float(D.min()), float(D.max())


def row_fingerprints(X) -> list[str]:
    """Short stable hashes of raw feature rows (12 significant digits)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = []
    for row in X:
        key = ",".join(f"{v:.12g}" for v in row)
        out.append(hashlib.sha1(key.encode()).hexdigest()[:16])
    return out
