"""Mask-to-attribution surrogate: a small ReLU network with analytic Jacobian.

Maps a p-vector mask to the p-vector attribution the masked model would
produce. Parameters are frozen after training; downstream optimization only
reads forward values and input Jacobians. Final results are always
re-evaluated with true attributions, never surrogate outputs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attribution import AttributionDataset
from .optim import Adam

__all__ = [
    "DmanModel",
    "DmanError",
    "train_dman",
    "dman_forward",
    "dman_input_gradient",
    "save_dman",
    "load_dman",
]

HIDDEN = (100, 100)


class DmanError(ValueError):
    """Raised on invalid surrogate input or failed training."""


@dataclass
class DmanModel:
    layer_sizes: list[int]  # [p, 100, 100, p]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    training_report: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.layer_sizes[0] != self.layer_sizes[-1]:
            raise DmanError("input and output width must both equal p")

    @property
    def p(self) -> int:
        return self.layer_sizes[0]

    def forward_batch(self, M: np.ndarray) -> np.ndarray:
        a = M
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ W + b, 0.0)
        return a @ self.weights[-1] + self.biases[-1]


def _init_params(layer_sizes: list[int], seed: int):
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return weights, biases


def train_dman(
    datt: AttributionDataset,
    lr: float = 1e-4,
    epochs: int = 2000,
    valid_fraction: float = 0.1,
    seed: int = 0,
) -> DmanModel:
    """Adam-optimized MSE fit with a held-out quality report.

    The report carries train/valid MSE and held-out R^2, which gates the
    downstream mask search.
    """
    if datt.n_rows < 20:
        raise DmanError(f"need at least 20 rows, got {datt.n_rows}")
    if not 0.0 < valid_fraction < 1.0:
        raise DmanError("valid_fraction must be in (0, 1)")
    p = datt.p
    rng = np.random.default_rng(seed)
    perm = rng.permutation(datt.n_rows)
    n_valid = max(1, int(round(valid_fraction * datt.n_rows)))
    valid_rows, train_rows = perm[:n_valid], perm[n_valid:]
    Xt, Yt = datt.masks[train_rows], datt.attributions[train_rows]
    Xv, Yv = datt.masks[valid_rows], datt.attributions[valid_rows]

    layer_sizes = [p, *HIDDEN, p]
    weights, biases = _init_params(layer_sizes, seed)
    params = weights + biases
    opt = Adam(params, lr=lr)
    n = len(Xt)
    for epoch in range(epochs):
        # Forward with caches.
        acts = [Xt]
        zs = []
        a = Xt
        for W, b in zip(weights[:-1], biases[:-1]):
            z = a @ W + b
            zs.append(z)
            a = np.maximum(z, 0.0)
            acts.append(a)
        out = a @ weights[-1] + biases[-1]
        resid = out - Yt
        loss = float(np.mean(resid * resid))
        if not np.isfinite(loss):
            raise DmanError(f"non-finite loss at epoch {epoch}")
        # Backward for mean-squared error over all n*p outputs.
        delta = 2.0 * resid / resid.size
        grads_w = [None] * len(weights)
        grads_b = [None] * len(biases)
        grads_w[-1] = acts[-1].T @ delta
        grads_b[-1] = delta.sum(axis=0)
        back = delta @ weights[-1].T
        for i in range(len(weights) - 2, -1, -1):
            back = back * (zs[i] > 0)
            grads_w[i] = acts[i].T @ back
            grads_b[i] = back.sum(axis=0)
            if i > 0:
                back = back @ weights[i].T
        opt.step(grads_w + grads_b)

    model = DmanModel(layer_sizes=layer_sizes, weights=weights, biases=biases)
    pred_t = model.forward_batch(Xt)
    pred_v = model.forward_batch(Xv)
    train_mse = float(np.mean((pred_t - Yt) ** 2))
    valid_mse = float(np.mean((pred_v - Yv) ** 2))
    sst = float(np.sum((Yv - Yv.mean()) ** 2))
    sse = float(np.sum((pred_v - Yv) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else 0.0
    model.training_report = {
        "train_mse": train_mse,
        "valid_mse": valid_mse,
        "valid_r2": r2,
        "epochs": epochs,
        "lr": lr,
        "seed": seed,
        "n_train": int(len(Xt)),
        "n_valid": int(len(Xv)),
    }
    return model


def dman_forward(model: DmanModel, mask: np.ndarray) -> np.ndarray:
    """Predicted attribution vector for one mask."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (model.p,):
        raise DmanError(f"expected mask of length {model.p}, got {mask.shape}")
    if not np.isfinite(mask).all():
        raise DmanError("mask contains non-finite values")
    return model.forward_batch(mask[None, :])[0]


def dman_input_gradient(model: DmanModel, mask: np.ndarray) -> np.ndarray:
    """Jacobian (p x p) of the predicted attribution w.r.t. the mask."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (model.p,):
        raise DmanError(f"expected mask of length {model.p}, got {mask.shape}")
    a = mask[None, :]
    jac = np.eye(model.p)  # running d(layer input)/d(mask)
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ W + b
        jac = W.T @ jac
        jac = jac * (z[0] > 0)[:, None]  # relu'(0) := 0
        a = np.maximum(z, 0.0)
    return model.weights[-1].T @ jac


def save_dman(model: DmanModel, directory: str | Path, name: str = "dman") -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    parts = []
    for W, b in zip(model.weights, model.biases):
        parts.append(W.ravel())
        parts.append(b.ravel())
    params = np.concatenate(parts)
    manifest = {
        "layer_sizes": model.layer_sizes,
        "n_params": len(params),
        "training_report": model.training_report,
    }
    (directory / f"{name}.json").write_text(json.dumps(manifest, sort_keys=True))
    with open(directory / f"{name}.bin", "wb") as fh:
        fh.write(struct.pack(f"<{len(params)}d", *params))


def load_dman(directory: str | Path, name: str = "dman") -> DmanModel:
    directory = Path(directory)
    manifest = json.loads((directory / f"{name}.json").read_text())
    raw = (directory / f"{name}.bin").read_bytes()
    params = np.array(struct.unpack(f"<{manifest['n_params']}d", raw))
    sizes = manifest["layer_sizes"]
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(params[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out))
        pos += fan_in * fan_out
        biases.append(params[pos:pos + fan_out])
        pos += fan_out
    return DmanModel(layer_sizes=sizes, weights=weights, biases=biases,
                     training_report=manifest.get("training_report", {}))
