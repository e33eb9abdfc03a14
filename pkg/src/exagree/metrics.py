"""Agreement, predictive-faithfulness, and subgroup-fairness metrics.

Definitions are deliberately brute-force-checkable: every top-k metric is
a set/count over the k highest-|attribution| features, PRA enumerates
feature pairs, and RC is exact Spearman on tie-free rankings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attribution import AttributionVector, Ranking, rank_of
from .data import Dataset, TaskSplit
from .diffsort import spearman_exact
from .models import Model, predict_proba

__all__ = [
    "AgreementReport",
    "FairnessReport",
    "topk_count",
    "agreement_suite",
    "pairwise_rank_agreement",
    "rank_correlation",
    "prediction_gap",
    "full_report",
    "fairness_suite",
    "best_count",
    "format_report_table",
]

METRIC_FIELDS = ("fa", "ra", "sa", "sra", "rc", "pra", "pgi", "pgu")
# Higher is better everywhere except PGU.
LOWER_IS_BETTER = ("pgu",)


@dataclass
class AgreementReport:
    k: float
    top_k_count: int
    fa: float
    ra: float
    sa: float
    sra: float
    pra: float
    rc: float
    pgi: float = 0.0
    pgu: float = 0.0
    method: str = "unknown"
    model_id: str = "unknown"

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in
                ("k", "top_k_count", *METRIC_FIELDS, "method", "model_id")}


@dataclass
class FairnessReport:
    subgroup_reports: dict[str, AgreementReport]
    disparities: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.disparities and len(self.subgroup_reports) == 2:
            a, b = self.subgroup_reports.values()
            self.disparities = {
                name: abs(getattr(a, name) - getattr(b, name))
                for name in METRIC_FIELDS
            }


def topk_count(p: int, k: float) -> int:
    """Number of top features for fraction k: round-half-up, floored at 1."""
    if not 0.0 < k <= 1.0:
        raise ValueError(f"k must be in (0, 1], got {k}")
    return max(1, int(math.floor(k * p + 0.5)))


def agreement_suite(a_exp: AttributionVector, a_gt: AttributionVector,
                    k: float) -> dict[str, float]:
    """FA / RA / SA / SRA over the top-K features of both attributions."""
    if a_exp.p != a_gt.p:
        raise ValueError(f"length mismatch: {a_exp.p} vs {a_gt.p}")
    K = topk_count(a_exp.p, k)
    r_exp = rank_of(a_exp).ranks
    r_gt = rank_of(a_gt).ranks
    top_exp = set(np.flatnonzero(r_exp <= K).tolist())
    top_gt = set(np.flatnonzero(r_gt <= K).tolist())
    both = top_exp & top_gt
    s_exp = np.sign(a_exp.values)
    s_gt = np.sign(a_gt.values)
    fa = len(both) / K
    ra = sum(1 for j in both if r_exp[j] == r_gt[j]) / K
    sa = sum(1 for j in both if s_exp[j] == s_gt[j]) / K
    sra = sum(1 for j in both if r_exp[j] == r_gt[j] and s_exp[j] == s_gt[j]) / K
    return {"fa": fa, "ra": ra, "sa": sa, "sra": sra}


def pairwise_rank_agreement(r1: Ranking, r2: Ranking) -> float:
    """Fraction of unordered feature pairs whose relative order agrees."""
    a = np.asarray(r1.ranks if isinstance(r1, Ranking) else r1)
    b = np.asarray(r2.ranks if isinstance(r2, Ranking) else r2)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    p = len(a)
    da = a[:, None] - a[None, :]
    db = b[:, None] - b[None, :]
    iu = np.triu_indices(p, k=1)
    agree = np.sign(da[iu]) == np.sign(db[iu])
    return float(agree.mean())


def rank_correlation(r1: Ranking, r2: Ranking) -> float:
    return spearman_exact(r1, r2)


def prediction_gap(
    model: Model,
    ds: Dataset,
    split: TaskSplit,
    ranking: Ranking,
    k: float,
    mode: str,
    sigma: float = 0.1,
    n_perturb: int = 100,
    seed: int = 0,
    valid_idx: np.ndarray | None = None,
) -> float:
    """Mean |p(x) - p(x')| under noise on top-K (important) or the rest.

    ``valid_idx`` optionally restricts the evaluated rows (subgroup use).
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if mode not in ("important", "unimportant"):
        raise ValueError(f"mode must be 'important' or 'unimportant', got {mode!r}")
    K = topk_count(ds.p, k)
    cols = np.flatnonzero(ranking.ranks <= K) if mode == "important" \
        else np.flatnonzero(ranking.ranks > K)
    idx = split.valid_idx if valid_idx is None else np.asarray(valid_idx)
    Xv = ds.features[idx]
    base = predict_proba(model, Xv)
    if len(cols) == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(n_perturb):
        Xp = Xv.copy()
        Xp[:, cols] += rng.normal(0.0, sigma, size=(len(Xv), len(cols)))
        total += float(np.abs(predict_proba(model, Xp) - base).mean())
    return total / n_perturb


def full_report(
    model: Model,
    ds: Dataset,
    split: TaskSplit,
    a_exp: AttributionVector,
    a_gt: AttributionVector,
    k: float,
    sigma: float = 0.1,
    n_perturb: int = 100,
    seed: int = 0,
    valid_idx: np.ndarray | None = None,
) -> AgreementReport:
    """All eight metrics for one (model, explanation) pair against ground truth."""
    suite = agreement_suite(a_exp, a_gt, k)
    r_exp = rank_of(a_exp)
    r_gt = rank_of(a_gt)
    return AgreementReport(
        k=k,
        top_k_count=topk_count(a_exp.p, k),
        fa=suite["fa"], ra=suite["ra"], sa=suite["sa"], sra=suite["sra"],
        pra=pairwise_rank_agreement(r_exp, r_gt),
        rc=rank_correlation(r_exp, r_gt),
        pgi=prediction_gap(model, ds, split, r_exp, k, "important",
                           sigma, n_perturb, seed, valid_idx),
        pgu=prediction_gap(model, ds, split, r_exp, k, "unimportant",
                           sigma, n_perturb, seed, valid_idx),
        method=a_exp.method,
        model_id=a_exp.model_id,
    )


def fairness_suite(
    model: Model,
    ds: Dataset,
    split: TaskSplit,
    exp_by_group: dict[str, AttributionVector],
    gt_by_group: dict[str, AttributionVector],
    k: float,
    sigma: float = 0.1,
    n_perturb: int = 100,
    seed: int = 0,
) -> FairnessReport:
    """Per-subgroup metric reports and their absolute disparities.

    Subgroups follow the dataset's binary subgroup column; PGI/PGU sampling
    is restricted to each subgroup's validation rows.
    """
    if ds.subgroup_column is None:
        raise ValueError("dataset has no subgroup column")
    col = ds.features[split.valid_idx, ds.subgroup_column]
    levels = np.unique(col)
    if len(levels) != 2:
        raise ValueError("subgroup column must be binary on the validation split")
    reports: dict[str, AgreementReport] = {}
    for g, level in zip(sorted(exp_by_group), levels):
        rows = split.valid_idx[col == level]
        if len(rows) < 10:
            raise ValueError(f"subgroup too small: {g} has {len(rows)} rows")
        reports[g] = full_report(model, ds, split, exp_by_group[g],
                                 gt_by_group[g], k, sigma, n_perturb, seed,
                                 valid_idx=rows)
    return FairnessReport(subgroup_reports=reports)


def best_count(reports: list[AgreementReport]) -> list[int]:
    """Per-row count of metrics on which the row achieves the block-best value."""
    if not reports:
        raise ValueError("empty report table")
    if len(reports) < 2:
        raise ValueError("best_count needs at least two rows")
    counts = [0] * len(reports)
    for name in METRIC_FIELDS:
        values = [getattr(r, name) for r in reports]
        best = min(values) if name in LOWER_IS_BETTER else max(values)
        for i, v in enumerate(values):
            if v == best:  # ties all count
                counts[i] += 1
    return counts


def format_report_table(reports: list[AgreementReport],
                        counts: list[int] | None = None) -> str:
    """Aligned text table: Method, FA, RA, SA, SRA, RC, PRA, PGI, PGU, #Best."""
    header = ["Method", "FA", "RA", "SA", "SRA", "RC", "PRA", "PGI", "PGU", "#Best"]
    rows = []
    for i, r in enumerate(reports):
        rows.append([
            r.method,
            *(f"{getattr(r, m):.2f}" for m in ("fa", "ra", "sa", "sra",
                                               "rc", "pra", "pgi", "pgu")),
            str(counts[i]) if counts is not None else "-",
        ])
    widths = [max(len(h), *(len(row[c]) for row in rows))
              for c, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)
