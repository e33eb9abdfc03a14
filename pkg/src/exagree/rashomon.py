"""Mask sampling inside a (1 + epsilon) validation-loss bound.

Two strategies: plain rejection from the uniform box, and boundary line
search that bisects from the identity mask along random directions until
the loss lands just under the bound, which spreads masks toward the edge
of the admissible set where attribution ranges are widest.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, TaskSplit
from .models import (
    DEFAULT_MASK_MAX,
    Mask,
    MaskedModel,
    Model,
    log_loss,
    predict_proba,
)

__all__ = [
    "RashomonConfig",
    "RashomonSample",
    "rashomon_bound",
    "sample_masks",
    "is_in_rashomon",
    "accept_from_stream",
    "save_sample",
    "load_sample",
]

MEMBERSHIP_SLACK = 1e-12


@dataclass
class RashomonConfig:
    epsilon: float = 0.05
    n_samples: int = 500
    mask_max: float = DEFAULT_MASK_MAX
    seed: int = 0
    exploration: str = "boundary_line_search"  # or "rejection"
    attempts_per_sample: int = 40
    bisection_iters: int = 12

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.exploration not in ("rejection", "boundary_line_search"):
            raise ValueError(f"unknown exploration strategy {self.exploration!r}")


@dataclass
class RashomonSample:
    """Accepted masks (row 0 = identity) with their validation losses."""

    masks: np.ndarray
    losses: np.ndarray
    bound: float
    reference_loss: float
    seed: int = 0
    strategy: str = "boundary_line_search"
    epsilon: float = 0.05
    truncated: bool = False

    def __post_init__(self) -> None:
        self.masks = np.asarray(self.masks, dtype=np.float64)
        self.losses = np.asarray(self.losses, dtype=np.float64)
        if (self.losses > self.bound + MEMBERSHIP_SLACK).any():
            raise ValueError("stored loss exceeds the Rashomon bound")

    @property
    def n_masks(self) -> int:
        return self.masks.shape[0]


def rashomon_bound(reference_loss: float, epsilon: float) -> float:
    """(1 + epsilon) times the reference loss."""
    if reference_loss < 0:
        raise ValueError(f"reference loss must be >= 0, got {reference_loss}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    return (1.0 + epsilon) * reference_loss


def _masked_valid_loss(mask_values: np.ndarray, base: Model, ds: Dataset,
                       split: TaskSplit) -> float:
    masked = MaskedModel(base=base, mask=Mask(values=mask_values))
    Xv = ds.features[split.valid_idx]
    yv = ds.labels[split.valid_idx]
    return log_loss(predict_proba(masked, Xv), yv)


def is_in_rashomon(mask: Mask | np.ndarray, base: Model, ds: Dataset,
                   split: TaskSplit, bound: float) -> bool:
    values = mask.values if isinstance(mask, Mask) else np.asarray(mask, float)
    return _masked_valid_loss(values, base, ds, split) <= bound + MEMBERSHIP_SLACK


def accept_from_stream(proposals: np.ndarray, base: Model, ds: Dataset,
                       split: TaskSplit, bound: float) -> list[int]:
    """Indices of stream proposals admitted by the bound (order-preserving).

    Exposed so acceptance sets over a shared proposal stream can be compared
    across epsilon values: the admission predicate is monotone in the bound.
    """
    return [i for i, mask in enumerate(np.asarray(proposals, dtype=np.float64))
            if _masked_valid_loss(mask, base, ds, split) <= bound + MEMBERSHIP_SLACK]


def sample_masks(base: Model, ds: Dataset, split: TaskSplit,
                 cfg: RashomonConfig) -> RashomonSample:
    """Sample masks whose masked-model validation loss stays within the bound.

    Row 0 is always the identity mask. Returns a truncated sample (flagged)
    if the attempt budget runs out before n_samples acceptances.
    """
    p = ds.p
    ones = np.ones(p)
    ref_loss = _masked_valid_loss(ones, base, ds, split)
    bound = rashomon_bound(ref_loss, cfg.epsilon)
    rng = np.random.default_rng(cfg.seed)

    masks = [ones]
    losses = [ref_loss]
    truncated = False

    if cfg.exploration == "rejection":
        budget = cfg.attempts_per_sample * cfg.n_samples
        for _ in range(budget):
            if len(masks) >= cfg.n_samples:
                break
            cand = rng.uniform(0.0, cfg.mask_max, size=p)
            loss = _masked_valid_loss(cand, base, ds, split)
            if loss <= bound + MEMBERSHIP_SLACK:
                masks.append(cand)
                losses.append(loss)
        truncated = len(masks) < cfg.n_samples
    else:
        for _ in range(cfg.n_samples - 1):
            direction = rng.standard_normal(p)
            direction /= np.linalg.norm(direction)
            # Largest step keeping 1 + t*d inside [0, mask_max]^p.
            with np.errstate(divide="ignore"):
                pos = np.where(direction > 0, (cfg.mask_max - 1.0) / direction, np.inf)
                neg = np.where(direction < 0, (0.0 - 1.0) / direction, np.inf)
            t_max = float(min(pos.min(), neg.min()))
            cand = np.clip(ones + t_max * direction, 0.0, cfg.mask_max)
            loss = _masked_valid_loss(cand, base, ds, split)
            if loss <= bound + MEMBERSHIP_SLACK:
                masks.append(cand)
                losses.append(loss)
                continue
            lo, hi = 0.0, t_max
            for _ in range(cfg.bisection_iters):
                mid = 0.5 * (lo + hi)
                mid_loss = _masked_valid_loss(
                    np.clip(ones + mid * direction, 0.0, cfg.mask_max),
                    base, ds, split)
                if mid_loss > bound:
                    hi = mid
                else:
                    lo = mid
                    if mid_loss >= 0.95 * bound:
                        break
            cand = np.clip(ones + lo * direction, 0.0, cfg.mask_max)
            loss = _masked_valid_loss(cand, base, ds, split)
            masks.append(cand)
            losses.append(loss)

    return RashomonSample(
        masks=np.vstack(masks),
        losses=np.array(losses),
        bound=bound,
        reference_loss=ref_loss,
        seed=cfg.seed,
        strategy=cfg.exploration,
        epsilon=cfg.epsilon,
        truncated=truncated,
    )


def save_sample(sample: RashomonSample, directory: str | Path,
                feature_names: list[str]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "masks.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(feature_names)
        for row in sample.masks:
            writer.writerow([repr(float(v)) for v in row])
    with open(directory / "losses.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["loss"])
        for v in sample.losses:
            writer.writerow([repr(float(v))])
    manifest = {
        "epsilon": sample.epsilon,
        "bound": sample.bound,
        "reference_loss": sample.reference_loss,
        "seed": sample.seed,
        "strategy": sample.strategy,
        "truncated": sample.truncated,
        "n_masks": sample.n_masks,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                        sort_keys=True))


def load_sample(directory: str | Path) -> RashomonSample:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    with open(directory / "masks.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    masks = np.array([[float(v) for v in row] for row in rows])
    with open(directory / "losses.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    losses = np.array([float(row[0]) for row in rows])
    return RashomonSample(
        masks=masks, losses=losses, bound=manifest["bound"],
        reference_loss=manifest["reference_loss"], seed=manifest["seed"],
        strategy=manifest["strategy"], epsilon=manifest["epsilon"],
        truncated=manifest["truncated"],
    )
