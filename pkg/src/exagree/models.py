"""Reference predictors and masked composition.

Two from-scratch predictors (logistic regressor, small ReLU network) with
analytic input gradients, plus the multiplicative-mask wrapper that turns a
single reference model into a family of candidate models. Training is
full-batch gradient descent so a fixed seed yields byte-identical models.

ReLU convention: the subgradient at exactly 0 is taken as 0.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, TaskSplit

__all__ = [
    "ModelError",
    "LinearModel",
    "MlpModel",
    "Mask",
    "MaskedModel",
    "train_logistic",
    "train_mlp",
    "predict_proba",
    "log_loss",
    "input_gradient",
    "save_model",
    "load_model",
    "sigmoid",
]

DEFAULT_MASK_MAX = 2.0


class ModelError(ValueError):
    """Raised on invalid model parameters or training failure."""


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    seed: int | None = None

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.isfinite(self.weights).all() or not np.isfinite(self.bias):
            raise ModelError("non-finite linear model parameters")

    @property
    def p(self) -> int:
        return len(self.weights)

    def logit(self, X: np.ndarray) -> np.ndarray:
        X = _check_X(X, self.p)
        return X @ self.weights + self.bias

    def logit_gradient(self, X: np.ndarray) -> np.ndarray:
        X = _check_X(X, self.p)
        return np.broadcast_to(self.weights, X.shape).copy()


@dataclass
class MlpModel:
    """ReLU network with a scalar sigmoid output head."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int | None = None

    def __post_init__(self) -> None:
        sizes = list(self.layer_sizes)
        if len(sizes) < 2 or sizes[-1] != 1:
            raise ModelError("layer_sizes must end in an output width of 1")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ModelError("parameter count does not match layer_sizes")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ModelError(f"layer {i} shape mismatch")

    @property
    def p(self) -> int:
        return self.layer_sizes[0]

    def _forward(self, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (logits, pre-activations per hidden layer)."""
        a = X
        zs: list[np.ndarray] = []
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ W + b
            zs.append(z)
            a = np.maximum(z, 0.0)
        logits = (a @ self.weights[-1] + self.biases[-1])[:, 0]
        return logits, zs

    def logit(self, X: np.ndarray) -> np.ndarray:
        X = _check_X(X, self.p)
        return self._forward(X)[0]

    def logit_gradient(self, X: np.ndarray) -> np.ndarray:
        X = _check_X(X, self.p)
        _, zs = self._forward(X)
        # Backpropagate d(logit)/dx; relu'(0) := 0.
        grad = np.broadcast_to(self.weights[-1][:, 0], (X.shape[0], self.layer_sizes[-2])).copy()
        for i in range(len(self.weights) - 2, -1, -1):
            grad = grad * (zs[i] > 0)
            grad = grad @ self.weights[i].T
        return grad


@dataclass
class Mask:
    """Per-feature non-negative multiplier characterizing one candidate model."""

    values: np.ndarray
    state: str = "active"  # active | frozen | invalid
    mask_max: float = DEFAULT_MASK_MAX

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if (self.values < 0).any() or (self.values > self.mask_max).any():
            raise ModelError(f"mask values must lie in [0, {self.mask_max}]")


@dataclass
class MaskedModel:
    """Composition of a reference model with an input mask."""

    base: LinearModel | MlpModel
    mask: Mask

    def __post_init__(self) -> None:
        if len(self.mask.values) != self.base.p:
            raise ModelError("mask length must equal feature count")

    @property
    def p(self) -> int:
        return self.base.p

    def logit(self, X: np.ndarray) -> np.ndarray:
        X = _check_X(X, self.p)
        return self.base.logit(X * self.mask.values)

    def logit_gradient(self, X: np.ndarray) -> np.ndarray:
        X = _check_X(X, self.p)
        return self.base.logit_gradient(X * self.mask.values) * self.mask.values


Model = LinearModel | MlpModel | MaskedModel


def _check_X(X: np.ndarray, p: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != p:
        raise ModelError(f"expected {p} feature columns, got {X.shape[1]}")
    return X


def predict_proba(model: Model, X: np.ndarray) -> np.ndarray:
    return sigmoid(model.logit(X))


def log_loss(p_hat: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood with 1e-12 clipping."""
    p_hat = np.asarray(p_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p_hat.shape != y.shape:
        raise ModelError(f"length mismatch: {p_hat.shape} vs {y.shape}")
    p_hat = np.clip(p_hat, 1e-12, 1.0 - 1e-12)
    return float(-np.mean(y * np.log(p_hat) + (1.0 - y) * np.log(1.0 - p_hat)))


def input_gradient(model: Model, x: np.ndarray) -> np.ndarray:
    """Gradient of the pre-sigmoid logit w.r.t. the inputs.

    For a single input vector, returns a vector of length p; for a matrix,
    a per-row gradient matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    grads = model.logit_gradient(x)
    return grads[0] if single else grads


def validation_loss(model: Model, ds: Dataset, split: TaskSplit) -> float:
    Xv = ds.features[split.valid_idx]
    yv = ds.labels[split.valid_idx]
    return log_loss(predict_proba(model, Xv), yv)


def train_logistic(
    ds: Dataset,
    split: TaskSplit,
    lr: float = 0.5,
    epochs: int = 500,
    seed: int = 0,
) -> LinearModel:
    """Full-batch gradient descent on log loss from an all-zero start."""
    if lr <= 0:
        raise ModelError(f"lr must be positive, got {lr}")
    X = ds.features[split.train_idx]
    y = ds.labels[split.train_idx].astype(np.float64)
    n, p = X.shape
    w = np.zeros(p)
    b = 0.0
    for epoch in range(epochs):
        p_hat = sigmoid(X @ w + b)
        resid = p_hat - y
        w -= lr * (X.T @ resid) / n
        b -= lr * float(resid.mean())
        if not (np.isfinite(w).all() and np.isfinite(b)):
            raise ModelError(f"training diverged at epoch {epoch}")
    return LinearModel(weights=w, bias=b, seed=seed)


def init_mlp(layer_sizes: list[int], seed: int) -> MlpModel:
    """He-scaled Gaussian initialization, deterministic under seed."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_sizes=list(layer_sizes), weights=weights, biases=biases, seed=seed)


def train_mlp(
    ds: Dataset,
    split: TaskSplit,
    layer_sizes: list[int] | None = None,
    lr: float = 0.1,
    epochs: int = 1000,
    seed: int = 0,
) -> MlpModel:
    """Full-batch gradient descent for the ReLU network."""
    if lr <= 0:
        raise ModelError(f"lr must be positive, got {lr}")
    p = ds.p
    if layer_sizes is None:
        layer_sizes = [p, 16, 1]
    if layer_sizes[0] != p:
        raise ModelError(f"layer_sizes[0]={layer_sizes[0]} but dataset has p={p}")
    model = init_mlp(layer_sizes, seed)
    X = ds.features[split.train_idx]
    y = ds.labels[split.train_idx].astype(np.float64)
    n = len(y)
    for epoch in range(epochs):
        # Forward with cached activations.
        acts = [X]
        zs = []
        a = X
        for W, b in zip(model.weights[:-1], model.biases[:-1]):
            z = a @ W + b
            zs.append(z)
            a = np.maximum(z, 0.0)
            acts.append(a)
        logits = (a @ model.weights[-1] + model.biases[-1])[:, 0]
        p_hat = sigmoid(logits)
        if not np.isfinite(p_hat).all():
            raise ModelError(f"training diverged at epoch {epoch}")
        # Backward: d(logloss)/d(logit) = (p_hat - y)/n.
        delta = ((p_hat - y) / n)[:, None]
        grads_w = [None] * len(model.weights)
        grads_b = [None] * len(model.biases)
        grads_w[-1] = acts[-1].T @ delta
        grads_b[-1] = delta.sum(axis=0)
        back = delta @ model.weights[-1].T
        for i in range(len(model.weights) - 2, -1, -1):
            back = back * (zs[i] > 0)
            grads_w[i] = acts[i].T @ back
            grads_b[i] = back.sum(axis=0)
            if i > 0:
                back = back @ model.weights[i].T
        for i in range(len(model.weights)):
            model.weights[i] -= lr * grads_w[i]
            model.biases[i] -= lr * grads_b[i]
    return model


# --- serialization: JSON manifest + flat little-endian float64 parameters ---

def _flatten_params(model: Model) -> np.ndarray:
    if isinstance(model, LinearModel):
        return np.concatenate([model.weights, [model.bias]])
    if isinstance(model, MlpModel):
        parts = []
        for W, b in zip(model.weights, model.biases):
            parts.append(W.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)
    raise ModelError(f"cannot serialize {type(model).__name__}")


def save_model(model: LinearModel | MlpModel, directory: str | Path, name: str) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    params = _flatten_params(model)
    if isinstance(model, LinearModel):
        manifest = {"kind": "linear", "p": model.p, "seed": model.seed,
                    "n_params": len(params)}
    else:
        manifest = {"kind": "mlp", "layer_sizes": model.layer_sizes,
                    "seed": model.seed, "n_params": len(params)}
    (directory / f"{name}.json").write_text(json.dumps(manifest, sort_keys=True))
    with open(directory / f"{name}.bin", "wb") as fh:
        fh.write(struct.pack(f"<{len(params)}d", *params))


def load_model(directory: str | Path, name: str) -> LinearModel | MlpModel:
    directory = Path(directory)
    manifest = json.loads((directory / f"{name}.json").read_text())
    raw = (directory / f"{name}.bin").read_bytes()
    params = np.array(struct.unpack(f"<{manifest['n_params']}d", raw))
    if manifest["kind"] == "linear":
        return LinearModel(weights=params[:-1], bias=float(params[-1]),
                           seed=manifest.get("seed"))
    sizes = manifest["layer_sizes"]
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(params[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out))
        pos += fan_in * fan_out
        biases.append(params[pos:pos + fan_out])
        pos += fan_out
    return MlpModel(layer_sizes=sizes, weights=weights, biases=biases,
                    seed=manifest.get("seed"))
