"""Feature attribution: permutation importance, gradient baselines, rankings.

Global attributions are instance averages over the validation split.
Permutation importance yields non-negative magnitudes; the sign is taken
from the mean analytic input gradient (exact for linear models), so the
two are decomposed and recombined as sign * magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, TaskSplit
from .models import (
    LinearModel,
    Mask,
    MaskedModel,
    Model,
    ModelError,
    log_loss,
    predict_proba,
)

__all__ = [
    "AttributionVector",
    "Ranking",
    "AttributionDataset",
    "permutation_fis",
    "ground_truth_lr",
    "explain_baseline",
    "rank_of",
    "build_attribution_dataset",
    "BASELINE_KINDS",
]

BASELINE_KINDS = ("random", "vanilla_grad", "grad_x_input",
                  "integrated_gradients", "smoothgrad")


@dataclass
class AttributionVector:
    values: np.ndarray
    method: str = "unknown"
    model_id: str = "unknown"

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.isfinite(self.values).all():
            raise ValueError("attribution values must be finite")

    @property
    def p(self) -> int:
        return len(self.values)


@dataclass
class Ranking:
    """1-based permutation; ranks[i] = rank of feature i, 1 = most important."""

    ranks: np.ndarray
    tie_rule: str = "stable_index"
    degenerate: bool = False

    def __post_init__(self) -> None:
        self.ranks = np.asarray(self.ranks, dtype=np.int64)
        p = len(self.ranks)
        if sorted(self.ranks.tolist()) != list(range(1, p + 1)):
            raise ValueError(f"ranks must be a permutation of 1..{p}")

    @property
    def p(self) -> int:
        return len(self.ranks)

    def order(self) -> np.ndarray:
        """Feature indices from most to least important."""
        return np.argsort(self.ranks, kind="stable")


@dataclass
class AttributionDataset:
    """Aligned (mask, attribution) rows for surrogate training."""

    masks: np.ndarray
    attributions: np.ndarray

    def __post_init__(self) -> None:
        self.masks = np.asarray(self.masks, dtype=np.float64)
        self.attributions = np.asarray(self.attributions, dtype=np.float64)
        if self.masks.shape != self.attributions.shape:
            raise ValueError("masks and attributions must have equal shape")

    @property
    def n_rows(self) -> int:
        return self.masks.shape[0]

    @property
    def p(self) -> int:
        return self.masks.shape[1]


def rank_of(a: AttributionVector | np.ndarray) -> Ranking:
    """Descending-|value| ranking with stable index tie-break."""
    values = a.values if isinstance(a, AttributionVector) else np.asarray(a, float)
    mags = np.abs(values)
    order = np.argsort(-mags, kind="stable")
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(1, len(values) + 1)
    degenerate = bool(len(np.unique(mags)) == 1 and len(values) > 1)
    return Ranking(ranks=ranks, degenerate=degenerate)


def _gradient_signs(model: Model, X: np.ndarray) -> np.ndarray:
    mean_grad = model.logit_gradient(X).mean(axis=0)
    signs = np.sign(mean_grad)
    signs[signs == 0] = 1.0  # unsigned resolved to +
    return signs


def permutation_fis(
    model: Model,
    ds: Dataset,
    split: TaskSplit,
    n_repeats: int = 5,
    seed: int = 0,
) -> AttributionVector:
    """Permutation feature importance with gradient-derived signs.

    Magnitude is the mean validation log-loss increase over n_repeats
    column shuffles, floored at 0; evaluated on the validation split.
    """
    if n_repeats < 1:
        raise ValueError(f"n_repeats must be >= 1, got {n_repeats}")
    Xv = ds.features[split.valid_idx]
    yv = ds.labels[split.valid_idx]
    base_loss = log_loss(predict_proba(model, Xv), yv)
    rng = np.random.default_rng(seed)
    p = ds.p
    magnitudes = np.zeros(p)
    for j in range(p):
        deltas = np.empty(n_repeats)
        for r in range(n_repeats):
            Xp = Xv.copy()
            Xp[:, j] = Xp[rng.permutation(len(Xv)), j]
            deltas[r] = log_loss(predict_proba(model, Xp), yv) - base_loss
        magnitudes[j] = max(float(deltas.mean()), 0.0)
    signs = _gradient_signs(model, Xv)
    model_id = getattr(model, "model_id", type(model).__name__)
    return AttributionVector(values=signs * magnitudes, method="fis",
                             model_id=str(model_id))


def ground_truth_lr(model: LinearModel) -> AttributionVector:
    """Signed coefficients of a logistic regressor on standardized inputs."""
    return AttributionVector(values=model.weights.copy(), method="lr_coefficients",
                             model_id="reference_lr")


def explain_baseline(
    kind: str,
    model: Model,
    ds: Dataset,
    split: TaskSplit,
    params: dict | None = None,
    seed: int = 0,
) -> AttributionVector:
    """Gradient-based and random baseline explainers (global, instance-averaged)."""
    params = dict(params or {})
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unsupported explainer kind: {kind!r}")
    Xv = ds.features[split.valid_idx]
    rng = np.random.default_rng(seed)
    if kind == "random":
        values = rng.standard_normal(ds.p)
    elif kind == "vanilla_grad":
        values = model.logit_gradient(Xv).mean(axis=0)
    elif kind == "grad_x_input":
        values = (model.logit_gradient(Xv) * Xv).mean(axis=0)
    elif kind == "integrated_gradients":
        steps = int(params.get("steps", 50))
        total = np.zeros_like(Xv)
        for s in range(steps):  # left Riemann sum from a zero baseline
            total += model.logit_gradient(Xv * (s / steps))
        values = (Xv * total / steps).mean(axis=0)
    else:  # smoothgrad
        n_noisy = int(params.get("n_noisy", 25))
        sigma = float(params.get("sigma_scale", 0.1)) * Xv.std(axis=0)
        total = np.zeros_like(Xv)
        for _ in range(n_noisy):
            total += model.logit_gradient(Xv + rng.standard_normal(Xv.shape) * sigma)
        values = (total / n_noisy).mean(axis=0)
    model_id = getattr(model, "model_id", type(model).__name__)
    return AttributionVector(values=values, method=kind, model_id=str(model_id))


def integrated_gradients_per_instance(model: Model, X: np.ndarray,
                                      steps: int = 50) -> np.ndarray:
    """Per-instance IG from a zero baseline (left Riemann sum)."""
    X = np.asarray(X, dtype=np.float64)
    total = np.zeros_like(X)
    for s in range(steps):
        total += model.logit_gradient(X * (s / steps))
    return X * total / steps


def build_attribution_dataset(
    sample,
    base: Model,
    ds: Dataset,
    split: TaskSplit,
    n_repeats: int = 5,
    seed: int = 0,
) -> AttributionDataset:
    """Attribution row per Rashomon mask; per-row seed = seed XOR row index."""
    masks = np.asarray(sample.masks, dtype=np.float64)
    rows = np.empty_like(masks)
    for i in range(masks.shape[0]):
        masked = MaskedModel(base=base, mask=Mask(values=masks[i]))
        rows[i] = permutation_fis(masked, ds, split, n_repeats=n_repeats,
                                  seed=seed ^ i).values
    return AttributionDataset(masks=masks.copy(), attributions=rows)
