"""Black-box regressors: ridge-linear and a small tanh MLP trained with Adam."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import Dataset
from .errors import DataError, SingularSystemError, TrainingError

FORMAT_HEADER = "# localexp model v1"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-2
    batch_size: int = 32
    seed: int = 0
    l2_penalty: float = 0.0
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be nonnegative")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


class RegressionModel:
    """Pure prediction interface shared by trained and closed-form models."""

    kind = ""
    clamp: float | None = None
    dimension: int | None = None

    def _raw_predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray | float:
        """Predict for one row (returns float) or a matrix of rows."""
        A = np.asarray(X, dtype=float)
        single = A.ndim == 1
        A = np.atleast_2d(A)
        if self.dimension is not None and A.shape[1] != self.dimension:
            raise ValueError(f"dimension mismatch: model expects {self.dimension}, got {A.shape[1]}")
        out = self._raw_predict(A)
        if self.clamp is not None:
            out = np.clip(out, -self.clamp, self.clamp)
        return float(out[0]) if single else out

    __call__ = predict


class LinearModel(RegressionModel):
    kind = "linear"

    def __init__(self, weights, intercept: float = 0.0, clamp: float | None = None):
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        self.intercept = float(intercept)
        self.dimension = self.weights.shape[0]
        self.clamp = clamp

    @property
    def parameters(self) -> np.ndarray:
        return np.concatenate([[self.intercept], self.weights])

    def _raw_predict(self, X):
        return X @ self.weights + self.intercept


class MLPModel(RegressionModel):
    """Fully connected tanh network with a linear scalar output.

    ``widths`` lists every layer size, input first and 1 last. Parameters
    are a flat vector of (W, b) per layer, W stored row-major (in x out).
    """

    kind = "mlp"

    def __init__(self, widths: Sequence[int], parameters=None, clamp: float | None = None):
        self.widths = tuple(int(w) for w in widths)
        if len(self.widths) < 2 or self.widths[-1] != 1:
            raise ValueError("widths must start with the input size and end with 1")
        self.dimension = self.widths[0]
        n = self.n_parameters(self.widths)
        self.parameters = np.zeros(n) if parameters is None else np.asarray(parameters, dtype=float).copy()
        if self.parameters.shape != (n,):
            raise ValueError(f"expected {n} parameters, got {self.parameters.shape}")
        self.clamp = clamp

    @staticmethod
    def n_parameters(widths) -> int:
        return sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))

    def unpack(self, theta=None):
        theta = self.parameters if theta is None else theta
        layers, k = [], 0
        for a, b in zip(self.widths[:-1], self.widths[1:]):
            W = theta[k:k + a * b].reshape(a, b)
            k += a * b
            layers.append((W, theta[k:k + b]))
            k += b
        return layers

    def _forward(self, X, theta=None):
        acts = [X]
        layers = self.unpack(theta)
        h = X
        for li, (W, b) in enumerate(layers):
            z = h @ W + b
            h = z if li == len(layers) - 1 else np.tanh(z)
            acts.append(h)
        return acts

    def _raw_predict(self, X):
        return self._forward(X)[-1][:, 0]

    def loss_and_grad(self, theta, X, y, l2_penalty: float = 0.0):
        """Mean squared error (+ l2 on weight matrices) and its gradient in theta."""
        acts = self._forward(X, theta)
        layers = self.unpack(theta)
        n = X.shape[0]
        r = acts[-1][:, 0] - y
        with np.errstate(over="ignore", invalid="ignore"):
            loss = float(np.mean(r ** 2))
        grads = []
        delta = (2.0 / n) * r[:, None]
        for li in range(len(layers) - 1, -1, -1):
            W, _ = layers[li]
            gW = acts[li].T @ delta
            gb = delta.sum(axis=0)
            if l2_penalty:
                gW = gW + 2.0 * l2_penalty * W
            grads.append((gW, gb))
            if li > 0:
                delta = (delta @ W.T) * (1.0 - acts[li] ** 2)
        if l2_penalty:
            loss += l2_penalty * sum(float(np.sum(W ** 2)) for W, _ in layers)
        grad = np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in reversed(grads)])
        return loss, grad


def gradient_check(model: MLPModel, X, y, theta=None, eps: float = 1e-6, l2_penalty: float = 0.0) -> float:
    """Relative error ``||g - g_fd|| / max(||g||, ||g_fd||)`` against central differences."""
    theta = model.parameters if theta is None else np.asarray(theta, dtype=float)
    _, g = model.loss_and_grad(theta, X, y, l2_penalty)
    fd = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = eps
        fd[k] = (model.loss_and_grad(theta + e, X, y, l2_penalty)[0]
                 - model.loss_and_grad(theta - e, X, y, l2_penalty)[0]) / (2 * eps)
    scale = max(np.linalg.norm(g), np.linalg.norm(fd))
    return float(np.linalg.norm(g - fd) / scale) if scale > 0 else 0.0


class FunctionModel(RegressionModel):
    """Wraps a closed-form vectorized function ``f(X) -> (n,)``."""

    kind = "function"

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], dimension: int, name: str = "f",
                 clamp: float | None = None):
        self.fn = fn
        self.dimension = dimension
        self.name = name
        self.clamp = clamp

    def _raw_predict(self, X):
        return np.asarray(self.fn(X), dtype=float).reshape(-1)


def _design(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


def train_linear(data: Dataset, l2_penalty: float = 0.0, clamp: float | None = None) -> LinearModel:
    """Ordinary (ridge when ``l2_penalty > 0``) least squares with an unpenalized intercept."""
    y = data.require_targets()
    Xt = _design(data.features)
    G = Xt.T @ Xt
    if l2_penalty:
        G[1:, 1:] += l2_penalty * np.eye(data.d)
    elif np.linalg.matrix_rank(Xt) < Xt.shape[1]:
        raise SingularSystemError("normal equations are singular; use l2_penalty > 0")
    beta = np.linalg.solve(G, Xt.T @ y)
    return LinearModel(beta[1:], beta[0], clamp=clamp)


def init_mlp(widths, rng: np.random.Generator) -> np.ndarray:
    chunks = []
    for a, b in zip(widths[:-1], widths[1:]):
        lim = math.sqrt(6.0 / (a + b))
        chunks.append(rng.uniform(-lim, lim, size=a * b))
        chunks.append(np.zeros(b))
    return np.concatenate(chunks)


def train_mlp(data: Dataset, config: TrainConfig, clamp: float | None = None,
              history: list | None = None) -> MLPModel:
    """Mini-batch Adam on mean squared error; deterministic given ``config.seed``."""
    y = data.require_targets()
    X = data.features
    m = data.m
    if config.batch_size > m:
        raise DataError(f"batch_size {config.batch_size} exceeds dataset size {m}")
    rng = np.random.default_rng(config.seed)
    model = MLPModel((data.d, *config.hidden, 1), clamp=clamp)
    theta = init_mlp(model.widths, rng)
    mom = np.zeros_like(theta)
    vel = np.zeros_like(theta)
    b1, b2, eps = 0.9, 0.999, 1e-8
    t = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(m)
        for s in range(0, m, config.batch_size):
            idx = perm[s:s + config.batch_size]
            loss, g = model.loss_and_grad(theta, X[idx], y[idx], config.l2_penalty)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, step {t}")
            t += 1
            mom = b1 * mom + (1 - b1) * g
            vel = b2 * vel + (1 - b2) * g * g
            theta = theta - config.learning_rate * (mom / (1 - b1 ** t)) / (np.sqrt(vel / (1 - b2 ** t)) + eps)
        if history is not None:
            history.append(float(np.mean((model._forward(X, theta)[-1][:, 0] - y) ** 2)))
    model.parameters = theta
    return model


def train(kind: str, data: Dataset, config: TrainConfig | None = None,
          clamp: float | None = None) -> RegressionModel:
    config = config or TrainConfig()
    data.require_targets()
    if not data.standardized:
        warnings.warn("training on unstandardized features", stacklevel=2)
    if config.batch_size > data.m:
        raise DataError(f"batch_size {config.batch_size} exceeds dataset size {data.m}")
    if kind == "linear":
        return train_linear(data, config.l2_penalty, clamp=clamp)
    if kind == "mlp":
        return train_mlp(data, config, clamp=clamp)
    raise ValueError(f"unknown model kind {kind!r}")


def mse(model: RegressionModel, data: Dataset) -> float:
    y = data.require_targets()
    return float(np.mean((model.predict(data.features) - y) ** 2))


def fit_output_bound(model: RegressionModel, data: Dataset, B: float | None = None) -> float:
    """Bound on |predictions| and |targets| over ``data``, inflated by 10%.

    A user-supplied ``B`` wins.
    """
    if B is not None:
        return float(B)
    vals = [np.abs(model.predict(data.features))]
    if data.targets is not None:
        vals.append(np.abs(data.targets))
    return 1.1 * float(max(v.max() for v in vals))


def _fmt_floats(v) -> str:
    return " ".join(repr(float(x)) for x in v)


def save_model(model: RegressionModel, path, meta: dict | None = None) -> None:
    """Flat ``key=value`` text; floats written with ``repr`` so they round-trip."""
    if isinstance(model, LinearModel):
        arch = str(model.dimension)
    elif isinstance(model, MLPModel):
        arch = ",".join(str(w) for w in model.widths)
    else:
        raise TypeError(f"cannot serialize model kind {model.kind!r}")
    lines = [
        FORMAT_HEADER,
        f"kind={model.kind}",
        f"architecture={arch}",
        f"clamp={'none' if model.clamp is None else repr(float(model.clamp))}",
        f"parameters={_fmt_floats(model.parameters)}",
        f"meta={json.dumps(meta or {}, sort_keys=True)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path) -> tuple[RegressionModel, dict]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such model file: {path}")
    kv = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        k, _, v = line.partition("=")
        kv[k] = v
    try:
        clamp = None if kv["clamp"] == "none" else float(kv["clamp"])
        params = np.array([float(x) for x in kv["parameters"].split()])
        if kv["kind"] == "linear":
            model = LinearModel(params[1:], params[0], clamp=clamp)
        elif kv["kind"] == "mlp":
            model = MLPModel([int(w) for w in kv["architecture"].split(",")], params, clamp=clamp)
        else:
            raise DataError(f"unknown model kind {kv['kind']!r}")
        meta = json.loads(kv.get("meta", "{}"))
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed model file {path}: {exc}") from None
    return model, meta
