"""Multi-head mask search for stakeholder-aligned explanation models.

A bank of mask heads starts at the identity, is pushed by Adam to minimize
rank + sign + sparsity + diversity losses through the frozen surrogate and
the soft sorting network, and is kept inside the Rashomon bound by
freezing any head that steps out. The winning head is judged on TRUE
permutation attributions recomputed from the masked model, never on
surrogate outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attribution import AttributionVector, Ranking, permutation_fis, rank_of
from .data import Dataset, TaskSplit
from .diffsort import (
    DegenerateRankingError,
    SortingNetworkPlan,
    build_plan,
    soft_sort,
    soft_sort_gradient,
    spearman_exact,
    spearman_soft,
)
from .dman import DmanModel, dman_forward, dman_input_gradient
from .metrics import AgreementReport, best_count, full_report
from .models import DEFAULT_MASK_MAX, Mask, MaskedModel, Model
from .optim import Adam, StepDecay
from .rashomon import RashomonSample, is_in_rashomon
from .attribution import BASELINE_KINDS, explain_baseline

__all__ = [
    "StakeholderTarget",
    "MhmnConfig",
    "SaemResult",
    "SaemError",
    "initialize_heads",
    "head_losses",
    "batch_regularizers",
    "optimize_saem",
    "audit_disagreement",
]


class SaemError(RuntimeError):
    """Raised when the mask search cannot proceed or produce a result."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


@dataclass
class StakeholderTarget:
    target_ranking: Ranking
    target_signs: np.ndarray | None = None  # entries in {-1, 0, +1}; 0 = unspecified
    source: str = "raw"
    stakeholder_id: str = "default"

    def __post_init__(self) -> None:
        if self.target_signs is not None:
            self.target_signs = np.asarray(self.target_signs, dtype=np.float64)
            if len(self.target_signs) != self.target_ranking.p:
                raise ValueError("target_signs length must equal p")
            if not np.isin(self.target_signs, [-1.0, 0.0, 1.0]).all():
                raise ValueError("target signs must be in {-1, 0, +1}")


@dataclass
class MhmnConfig:
    heads: int = 50
    lr: float = 0.01
    scheduler_step: int = 50
    scheduler_gamma: float = 0.5
    lambda_sparsity: float = 0.1
    lambda_diversity: float = 0.1
    epochs: int = 100
    beta: float = 10.0
    seed: int = 0
    init_k: float = 0.25
    sign_tau: float = 0.01
    mask_max: float = DEFAULT_MASK_MAX
    min_dman_r2: float = 0.8
    fis_repeats: int = 5
    init_attempts: int = 50

    def __post_init__(self) -> None:
        if self.heads < 1:
            raise ValueError("need at least one head")
        if min(self.lr, self.beta, self.sign_tau) <= 0:
            raise ValueError("rates must be positive")


@dataclass
class SaemResult:
    best_mask: Mask
    true_attributions: AttributionVector
    achieved_ranking: Ranking
    spearman_vs_target: float
    loss_in_bound: bool
    validation_loss: float
    reference_spearman: float
    per_head_trace: list[dict] = field(default_factory=list)
    metric_report: AgreementReport | None = None


def initialize_heads(
    h: int,
    reference_ranking: Ranking,
    target: StakeholderTarget,
    k: float,
    seed: int,
    base: Model | None = None,
    ds: Dataset | None = None,
    split: TaskSplit | None = None,
    bound: float | None = None,
    mask_max: float = DEFAULT_MASK_MAX,
    attempts: int = 50,
) -> np.ndarray:
    """Identity masks plus attention-weighted Gaussian perturbations.

    Perturbation scale is 0.2 on features in the reference top-ceil(k*p) or
    whose rank differs between reference and target, 0.05 elsewhere. When a
    membership bound is supplied, out-of-bound draws are resampled up to
    ``attempts`` times per head.
    """
    p = reference_ranking.p
    top_count = int(np.ceil(k * p))
    attention = (reference_ranking.ranks <= top_count) | (
        reference_ranking.ranks != target.target_ranking.ranks)
    sigma = np.where(attention, 0.2, 0.05)
    rng = np.random.default_rng(seed)
    heads = np.empty((h, p))
    for i in range(h):
        for attempt in range(attempts):
            cand = np.clip(1.0 + rng.standard_normal(p) * sigma, 0.0, mask_max)
            if bound is None or is_in_rashomon(cand, base, ds, split, bound):
                heads[i] = cand
                break
        else:
            raise SaemError(
                f"could not initialize {h} in-bound heads; achieved {i}")
    return heads


def _surrogate_chain(mask: np.ndarray, dman: DmanModel,
                     plan: SortingNetworkPlan, beta: float):
    """Forward pieces shared by loss and gradient evaluation."""
    a = dman_forward(dman, mask)
    mags = np.abs(a)
    soft_ranks = soft_sort(mags, plan, beta).soft_ranks
    return a, mags, soft_ranks


def head_losses(
    mask: np.ndarray,
    dman: DmanModel,
    plan: SortingNetworkPlan,
    beta: float,
    target: StakeholderTarget,
    sign_tau: float = 0.01,
) -> dict[str, float]:
    """Rank and sign losses of one head through the surrogate.

    rank_loss is the negative soft Spearman correlation of the predicted
    attribution magnitudes' soft ranks against the target ranking;
    sign_loss is a soft (tanh) MSE on the features with a specified sign.
    """
    a, _, soft_ranks = _surrogate_chain(mask, dman, plan, beta)
    rho, _ = spearman_soft(soft_ranks, target.target_ranking)
    rank_loss = -rho
    sign_loss = 0.0
    if target.target_signs is not None:
        spec = target.target_signs != 0
        if spec.any():
            soft_signs = np.tanh(a[spec] / sign_tau)
            sign_loss = float(np.mean((soft_signs - target.target_signs[spec]) ** 2))
    return {"rank_loss": float(rank_loss), "sign_loss": float(sign_loss)}


def _head_loss_and_grad(mask, dman, plan, beta, target, sign_tau):
    """(rank_loss, sign_loss, gradient w.r.t. mask) for one head."""
    a, mags, soft_ranks = _surrogate_chain(mask, dman, plan, beta)
    J_dman = dman_input_gradient(dman, mask)          # p_out x p_in
    rho, d_rho = spearman_soft(soft_ranks, target.target_ranking)
    J_sort = soft_sort_gradient(mags, plan, beta)     # d soft_ranks / d mags
    d_mags = d_rho @ J_sort                           # d rho / d mags
    sign_a = np.sign(a)
    grad = -(d_mags * sign_a) @ J_dman                # d(-rho)/d mask
    rank_loss = -rho
    sign_loss = 0.0
    if target.target_signs is not None:
        spec = target.target_signs != 0
        if spec.any():
            t = np.tanh(a[spec] / sign_tau)
            resid = t - target.target_signs[spec]
            sign_loss = float(np.mean(resid ** 2))
            d_a = np.zeros_like(a)
            d_a[spec] = 2.0 * resid * (1.0 - t * t) / sign_tau / spec.sum()
            grad = grad + d_a @ J_dman
    return float(rank_loss), sign_loss, grad


def batch_regularizers(active_masks: np.ndarray) -> dict[str, float]:
    """Sparsity (mean L1 deviation from identity) and diversity
    (mean pairwise cosine similarity of deviations)."""
    M = np.atleast_2d(np.asarray(active_masks, dtype=np.float64))
    dev = M - 1.0
    sparsity = float(np.abs(dev).mean())
    m = M.shape[0]
    if m < 2:
        return {"sparsity_loss": sparsity, "diversity_loss": 0.0}
    norms = np.linalg.norm(dev, axis=1)
    total = 0.0
    pairs = 0
    for i in range(m):
        for j in range(i + 1, m):
            pairs += 1
            if norms[i] > 1e-12 and norms[j] > 1e-12:
                total += float(dev[i] @ dev[j] / (norms[i] * norms[j]))
    return {"sparsity_loss": sparsity, "diversity_loss": total / pairs}


def _regularizer_grads(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of sparsity and diversity losses w.r.t. the mask bank."""
    dev = M - 1.0
    m, p = M.shape
    g_sparse = np.sign(dev) / dev.size
    g_div = np.zeros_like(M)
    if m >= 2:
        norms = np.linalg.norm(dev, axis=1)
        pairs = m * (m - 1) / 2
        for i in range(m):
            for j in range(i + 1, m):
                if norms[i] > 1e-12 and norms[j] > 1e-12:
                    cos = float(dev[i] @ dev[j] / (norms[i] * norms[j]))
                    g_div[i] += (dev[j] / (norms[i] * norms[j])
                                 - cos * dev[i] / norms[i] ** 2) / pairs
                    g_div[j] += (dev[i] / (norms[i] * norms[j])
                                 - cos * dev[j] / norms[j] ** 2) / pairs
    return g_sparse, g_div


def total_loss_and_grad(
    masks: np.ndarray,
    dman: DmanModel,
    plan: SortingNetworkPlan,
    target: StakeholderTarget,
    cfg: MhmnConfig,
) -> tuple[float, np.ndarray]:
    """Combined objective over a mask bank and its analytic gradient.

    Exposed for finite-difference verification of the composed chain.
    """
    M = np.atleast_2d(masks)
    m = M.shape[0]
    grads = np.zeros_like(M)
    rank_total = sign_total = 0.0
    for i in range(m):
        rank_l, sign_l, g = _head_loss_and_grad(
            M[i], dman, plan, cfg.beta, target, cfg.sign_tau)
        rank_total += rank_l
        sign_total += sign_l
        grads[i] = g / m
    regs = batch_regularizers(M)
    g_sparse, g_div = _regularizer_grads(M)
    loss = (rank_total / m + sign_total / m
            + cfg.lambda_sparsity * regs["sparsity_loss"]
            + cfg.lambda_diversity * regs["diversity_loss"])
    grads += cfg.lambda_sparsity * g_sparse + cfg.lambda_diversity * g_div
    return float(loss), grads


def optimize_saem(
    base: Model,
    ds: Dataset,
    split: TaskSplit,
    sample: RashomonSample,
    dman: DmanModel,
    target: StakeholderTarget,
    cfg: MhmnConfig,
    reference_attr: AttributionVector | None = None,
) -> SaemResult:
    """Run the multi-head search and select the best head on true attributions."""
    r2 = dman.training_report.get("valid_r2")
    if r2 is not None and r2 < cfg.min_dman_r2:
        raise SaemError(
            f"surrogate quality gate failed: held-out R^2 {r2:.3f} < "
            f"{cfg.min_dman_r2}")
    p = ds.p
    plan = build_plan(p)
    bound = sample.bound
    if reference_attr is None:
        reference_attr = permutation_fis(base, ds, split,
                                         n_repeats=cfg.fis_repeats, seed=cfg.seed)
    reference_ranking = rank_of(reference_attr)

    heads = initialize_heads(
        cfg.heads, reference_ranking, target, cfg.init_k, cfg.seed,
        base=base, ds=ds, split=split, bound=bound, mask_max=cfg.mask_max,
        attempts=cfg.init_attempts)
    active = np.ones(cfg.heads, dtype=bool)
    snapshots = heads.copy()  # last in-bound value per head
    opt = Adam([heads], lr=cfg.lr)
    sched = StepDecay(cfg.lr, cfg.scheduler_step, cfg.scheduler_gamma)
    trace: list[dict] = []

    for epoch in range(cfg.epochs):
        if not active.any():
            break
        opt.lr = sched.lr_at(epoch)
        act_idx = np.flatnonzero(active)
        M_act = heads[act_idx]
        grads = np.zeros_like(heads)
        m = len(act_idx)
        rank_losses = np.full(cfg.heads, np.nan)
        sign_losses = np.full(cfg.heads, np.nan)
        for pos, i in enumerate(act_idx):
            try:
                rank_l, sign_l, g = _head_loss_and_grad(
                    heads[i], dman, plan, cfg.beta, target, cfg.sign_tau)
            except DegenerateRankingError:
                active[i] = False
                continue
            if not (np.isfinite(rank_l) and np.isfinite(g).all()):
                raise SaemError(f"non-finite loss at epoch {epoch}", trace)
            rank_losses[i] = rank_l
            sign_losses[i] = sign_l
            grads[i] = g / m
        g_sparse, g_div = _regularizer_grads(M_act)
        grads[act_idx] += (cfg.lambda_sparsity * g_sparse
                           + cfg.lambda_diversity * g_div)
        update_mask = np.zeros_like(heads)
        update_mask[active] = 1.0
        opt.step([grads], update_mask=[update_mask])
        np.clip(heads, 0.0, cfg.mask_max, out=heads)
        for i in np.flatnonzero(active):
            if is_in_rashomon(heads[i], base, ds, split, bound):
                snapshots[i] = heads[i]
            else:
                active[i] = False  # frozen at its last in-bound snapshot
        for i in range(cfg.heads):
            trace.append({
                "epoch": epoch,
                "head": i,
                "rank_loss": None if np.isnan(rank_losses[i]) else float(rank_losses[i]),
                "sign_loss": None if np.isnan(sign_losses[i]) else float(sign_losses[i]),
                "active": bool(active[i]),
            })

    # Candidate selection on TRUE attributions; identity mask always competes.
    candidates = [np.ones(p)] + [snapshots[i] for i in range(cfg.heads)]
    best = None
    from .models import log_loss, predict_proba
    Xv, yv = ds.features[split.valid_idx], ds.labels[split.valid_idx]
    ref_spear = None
    for idx, cand in enumerate(candidates):
        masked = MaskedModel(base=base, mask=Mask(values=cand, mask_max=cfg.mask_max))
        true_attr = permutation_fis(masked, ds, split,
                                    n_repeats=cfg.fis_repeats, seed=cfg.seed)
        ranking = rank_of(true_attr)
        spear = spearman_exact(ranking, target.target_ranking)
        vloss = log_loss(predict_proba(masked, Xv), yv)
        if idx == 0:
            ref_spear = spear
        if best is None or (spear, -vloss) > (best[0], -best[1]):
            best = (spear, vloss, cand, true_attr, ranking)
    spear, vloss, cand, true_attr, ranking = best
    in_bound = is_in_rashomon(cand, base, ds, split, bound)
    if not in_bound:
        raise SaemError("selected head failed the membership re-check", trace)
    return SaemResult(
        best_mask=Mask(values=cand, mask_max=cfg.mask_max),
        true_attributions=true_attr,
        achieved_ranking=ranking,
        spearman_vs_target=spear,
        loss_in_bound=in_bound,
        validation_loss=vloss,
        reference_spearman=ref_spear,
        per_head_trace=trace,
    )


def audit_disagreement(
    models: dict[str, Model],
    explainers: list[str],
    ds: Dataset,
    split: TaskSplit,
    gt: AttributionVector,
    ks: list[float],
    sigma: float = 0.1,
    n_perturb: int = 100,
    seed: int = 0,
) -> dict:
    """Metric suite for every (model, explainer, k) with per-block #Best counts."""
    report: dict = {}
    for model_id, model in models.items():
        per_k: dict = {}
        attributions = []
        for kind in explainers:
            if kind == "fis":
                a = permutation_fis(model, ds, split, seed=seed)
            elif kind in BASELINE_KINDS:
                a = explain_baseline(kind, model, ds, split, seed=seed)
            else:
                raise ValueError(f"unknown explainer {kind!r}")
            a.model_id = model_id
            attributions.append(a)
        for k in ks:
            rows = [full_report(model, ds, split, a, gt, k, sigma,
                                n_perturb, seed) for a in attributions]
            counts = best_count(rows) if len(rows) >= 2 else [0] * len(rows)
            per_k[k] = {"reports": rows, "best_counts": counts}
        report[model_id] = per_k
    return report
