"""Tabular binary-classification tasks: ingestion, standardization, splits.

All modeling downstream assumes standardized continuous features, so the
loaders here standardize unconditionally and keep the original mean/std as
bookkeeping in :class:`FeatureMeta`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "FeatureMeta",
    "TaskSplit",
    "DataError",
    "load_csv",
    "generate_synthetic",
    "save_csv",
    "split",
]


class DataError(ValueError):
    """Raised on malformed input data or invalid task parameters."""


@dataclass
class FeatureMeta:
    name: str
    kind: str  # "continuous" or "discrete"
    mean: float = 0.0
    std: float = 1.0


@dataclass
class Dataset:
    """A standardized binary task.

    ``features`` is n x p with continuous columns at mean 0 / std 1;
    ``labels`` is a 0/1 vector of length n.
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    feature_meta: list[FeatureMeta] = field(default_factory=list)
    subgroup_column: int | None = None

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n, p = self.features.shape
        if n < 2 or p < 2:
            raise DataError(f"dataset needs n >= 2 and p >= 2, got n={n}, p={p}")
        if not np.isin(self.labels, [0, 1]).all():
            raise DataError("labels must contain only 0/1")
        if self.feature_meta and len(self.feature_meta) != p:
            raise DataError("feature_meta length must equal feature count")
        if not self.feature_meta:
            self.feature_meta = [
                FeatureMeta(name=f"f{j}", kind="continuous") for j in range(p)
            ]
        if self.subgroup_column is not None:
            col = self.features[:, self.subgroup_column]
            if len(np.unique(col)) != 2:
                raise DataError("subgroup column must be binary")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return [m.name for m in self.feature_meta]


@dataclass(frozen=True)
class TaskSplit:
    train_idx: np.ndarray
    valid_idx: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "train_idx", np.asarray(self.train_idx, dtype=np.int64))
        object.__setattr__(self, "valid_idx", np.asarray(self.valid_idx, dtype=np.int64))
        if len(self.train_idx) == 0 or len(self.valid_idx) == 0:
            raise DataError("both sides of a split must be non-empty")
        overlap = np.intersect1d(self.train_idx, self.valid_idx)
        if len(overlap) > 0:
            raise DataError("train and validation indices overlap")


def _standardize(column: np.ndarray, name: str) -> tuple[np.ndarray, float, float]:
    mean = float(column.mean())
    std = float(column.std())
    if std == 0.0:
        raise DataError(f"constant feature column '{name}' cannot be standardized")
    return (column - mean) / std, mean, std


def load_csv(
    path: str | Path,
    label_column: str,
    subgroup_column: str | None = None,
) -> Dataset:
    """Load an RFC-4180 CSV with a header row into a standardized Dataset.

    Continuous columns are standardized to mean 0 / std 1; columns whose
    cells are all integers are treated as discrete and integer-encoded
    (still standardized for modeling, with kind recorded as discrete).
    Row order is preserved.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty CSV: {path}") from None
        rows = list(reader)
    if label_column not in header:
        raise DataError(f"missing label column '{label_column}'")
    label_idx = header.index(label_column)
    feat_names = [h for i, h in enumerate(header) if i != label_idx]
    feat_cols = [i for i in range(len(header)) if i != label_idx]

    n = len(rows)
    raw = np.empty((n, len(feat_cols)), dtype=np.float64)
    labels = np.empty(n, dtype=np.float64)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {r + 2}: expected {len(header)} cells, got {len(row)}")
        for c, i in enumerate(feat_cols):
            try:
                raw[r, c] = float(row[i])
            except ValueError:
                raise DataError(
                    f"unparseable cell at row {r + 2}, column '{header[i]}': {row[i]!r}"
                ) from None
        try:
            labels[r] = float(row[label_idx])
        except ValueError:
            raise DataError(
                f"unparseable cell at row {r + 2}, column '{label_column}': "
                f"{row[label_idx]!r}"
            ) from None

    if not np.isin(labels, [0.0, 1.0]).all():
        bad = sorted(set(labels[~np.isin(labels, [0.0, 1.0])]))
        raise DataError(f"non-binary label values: {bad}")

    meta: list[FeatureMeta] = []
    X = np.empty_like(raw)
    for c, name in enumerate(feat_names):
        col = raw[:, c]
        kind = "discrete" if np.all(col == np.round(col)) else "continuous"
        X[:, c], mean, std = _standardize(col, name)
        meta.append(FeatureMeta(name=name, kind=kind, mean=mean, std=std))

    sub_idx: int | None = None
    if subgroup_column is not None:
        if subgroup_column not in feat_names:
            raise DataError(f"missing subgroup column '{subgroup_column}'")
        sub_idx = feat_names.index(subgroup_column)
        if len(np.unique(raw[:, sub_idx])) != 2:
            raise DataError(f"subgroup column '{subgroup_column}' is not binary")

    return Dataset(
        name=path.stem,
        features=X,
        labels=labels.astype(np.int64),
        feature_meta=meta,
        subgroup_column=sub_idx,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def generate_synthetic(
    n: int,
    p: int,
    weights: np.ndarray,
    noise_std: float,
    seed: int,
    name: str = "synthetic",
) -> Dataset:
    """Gaussian features with a logistic label rule and known weights.

    Labels are Bernoulli(sigmoid(w.x + noise)). The draw is rejected and
    retried until the class balance lands within 5 percentage points of
    even, so the task matches a balanced benchmark setting.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if p < 2:
        raise DataError(f"need p >= 2, got {p}")
    if len(weights) != p:
        raise DataError(f"weights length {len(weights)} != p={p}")
    if noise_std < 0:
        raise DataError("noise_std must be >= 0")

    rng = np.random.default_rng(seed)
    for _ in range(200):
        X = rng.standard_normal((n, p))
        logits = X @ weights
        if noise_std > 0:
            logits = logits + rng.normal(0.0, noise_std, size=n)
        y = (rng.random(n) < _sigmoid(logits)).astype(np.int64)
        balance = y.mean()
        if 0.45 <= balance <= 0.55:
            break
    else:
        raise DataError("could not draw a balanced sample within the retry budget")

    meta = []
    Xs = np.empty_like(X)
    for j in range(p):
        Xs[:, j], mean, std = _standardize(X[:, j], f"gauss_{j}")
        meta.append(FeatureMeta(name=f"gauss_{j}", kind="continuous", mean=mean, std=std))
    return Dataset(name=name, features=Xs, labels=y, feature_meta=meta)


def save_csv(ds: Dataset, path: str | Path, manifest: dict | None = None) -> None:
    """Write a dataset as CSV (+ optional JSON sidecar manifest).

    The sidecar records generator provenance (weights, seed, noise_std)
    next to the CSV as ``<path>.manifest.json``.
    """
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.feature_names + ["label"])
        for i in range(ds.n):
            writer.writerow(
                [repr(float(v)) for v in ds.features[i]] + [int(ds.labels[i])]
            )
    if manifest is not None:
        sidecar = path.with_suffix(path.suffix + ".manifest.json")
        sidecar.write_text(json.dumps(manifest, indent=2, sort_keys=True))


def split(ds: Dataset, valid_fraction: float, seed: int) -> TaskSplit:
    """Deterministic stratified train/validation partition."""
    if not 0.0 < valid_fraction < 1.0:
        raise DataError(f"valid_fraction must be in (0, 1), got {valid_fraction}")
    rng = np.random.default_rng(seed)
    train_parts, valid_parts = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(ds.labels == cls)
        rng.shuffle(idx)
        n_valid = int(round(valid_fraction * len(idx)))
        if n_valid == 0 or n_valid == len(idx):
            raise DataError(
                f"class {cls} would be absent from one side of the split"
            )
        valid_parts.append(idx[:n_valid])
        train_parts.append(idx[n_valid:])
    train_idx = np.sort(np.concatenate(train_parts))
    valid_idx = np.sort(np.concatenate(valid_parts))
    return TaskSplit(train_idx=train_idx, valid_idx=valid_idx, seed=seed)
