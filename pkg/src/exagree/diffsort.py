"""Monotonic differentiable sorting network with Cauchy-CDF soft swaps.

A bitonic comparator schedule (power-of-two width, padded with a sentinel
that sinks to the bottom) is relaxed by replacing each compare-and-swap
with a convex soft swap whose mixing weight is the Cauchy CDF of the
scaled value difference. The relaxation yields a row-stochastic soft
permutation, soft ranks (rank 1 = largest value), and analytic Jacobians
for ranking supervision. Exact and soft Spearman correlations live here
too since both operate on ranks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SortingNetworkPlan",
    "SoftPermutation",
    "build_plan",
    "cauchy_swap",
    "soft_sort",
    "soft_sort_gradient",
    "spearman_exact",
    "spearman_soft",
    "DegenerateRankingError",
]

PAD_SENTINEL = -100.0


class DegenerateRankingError(ValueError):
    """Raised when a rank vector has zero variance."""


@dataclass(frozen=True)
class SortingNetworkPlan:
    """Bitonic comparator schedule sorting descending (largest to slot 0).

    Each layer is a list of disjoint (top, bottom) slot pairs: after the
    swap, ``top`` holds the (soft) larger of the two contents.
    """

    p: int
    n_padded: int
    layers: tuple[tuple[tuple[int, int], ...], ...]
    pad_sentinel: float = PAD_SENTINEL

    @property
    def n_comparators(self) -> int:
        return sum(len(layer) for layer in self.layers)


@dataclass
class SoftPermutation:
    """Relaxed permutation restricted to the real (unpadded) slots.

    ``matrix[pos, i]`` is the weight of input i at sorted position pos,
    rows renormalized after dropping padding; ``soft_ranks[i]`` is the
    expected 1-based position of input i (1 = largest).
    """

    matrix: np.ndarray
    soft_ranks: np.ndarray
    steepness: float


@lru_cache(maxsize=64)
def build_plan(p: int, pad_sentinel: float = PAD_SENTINEL) -> SortingNetworkPlan:
    """Comparator schedule for a descending bitonic sort of p values."""
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    n = 1
    while n < p:
        n *= 2
    layers: list[tuple[tuple[int, int], ...]] = []
    k = 2
    while k <= n:
        j = k // 2
        while j >= 1:
            layer = []
            for i in range(n):
                partner = i ^ j
                if partner > i:
                    # Descending overall: blocks with (i & k) == 0 take the max
                    # at the lower index.
                    if (i & k) == 0:
                        layer.append((i, partner))
                    else:
                        layer.append((partner, i))
            layers.append(tuple(layer))
            j //= 2
        k *= 2
    if not layers:  # p == 1
        layers = []
    return SortingNetworkPlan(p=p, n_padded=n, layers=tuple(layers),
                              pad_sentinel=pad_sentinel)


def cauchy_swap(a: float, b: float, beta: float) -> tuple[float, float, float]:
    """Soft compare-and-swap; returns (top, bottom, alpha).

    alpha is the Cauchy CDF of beta * (a - b); top + bottom == a + b exactly.
    """
    if beta <= 0:
        raise ValueError(f"steepness must be positive, got {beta}")
    alpha = float(np.arctan(beta * (a - b)) / np.pi + 0.5)
    top = alpha * a + (1.0 - alpha) * b
    bottom = (1.0 - alpha) * a + alpha * b
    return top, bottom, alpha


def _forward(values: np.ndarray, plan: SortingNetworkPlan, beta: float,
             with_jacobian: bool):
    p = plan.p
    n = plan.n_padded
    x = np.full(n, plan.pad_sentinel, dtype=np.float64)
    x[:p] = values
    P = np.eye(n)
    if with_jacobian:
        dx = np.zeros((n, p))
        dx[:p, :p] = np.eye(p)
        dP = np.zeros((n, n, p))
    for layer in plan.layers:
        idx = np.array(layer)  # shape (c, 2): columns top, bottom
        t, bo = idx[:, 0], idx[:, 1]
        a, b = x[t], x[bo]
        u = beta * (a - b)
        alpha = np.arctan(u) / np.pi + 0.5
        x_t = alpha * a + (1.0 - alpha) * b
        x_b = (1.0 - alpha) * a + alpha * b
        Pt, Pb = P[t], P[bo]
        new_Pt = alpha[:, None] * Pt + (1.0 - alpha[:, None]) * Pb
        new_Pb = (1.0 - alpha[:, None]) * Pt + alpha[:, None] * Pb
        if with_jacobian:
            da, db = dx[t], dx[bo]
            dalpha = (beta / (np.pi * (1.0 + u * u)))[:, None] * (da - db)
            dx_t = alpha[:, None] * da + (1.0 - alpha[:, None]) * db \
                + (a - b)[:, None] * dalpha
            dx_b = (1.0 - alpha[:, None]) * da + alpha[:, None] * db \
                - (a - b)[:, None] * dalpha
            dPt, dPb = dP[t], dP[bo]
            diff = (Pt - Pb)[:, :, None] * dalpha[:, None, :]
            new_dPt = alpha[:, None, None] * dPt \
                + (1.0 - alpha[:, None, None]) * dPb + diff
            new_dPb = (1.0 - alpha[:, None, None]) * dPt \
                + alpha[:, None, None] * dPb - diff
            dx[t], dx[bo] = dx_t, dx_b
            dP[t], dP[bo] = new_dPt, new_dPb
        x[t], x[bo] = x_t, x_b
        P[t], P[bo] = new_Pt, new_Pb
    positions = np.arange(1, n + 1, dtype=np.float64)
    soft_ranks = positions @ P[:, :p]
    if with_jacobian:
        jac = np.einsum("k,kiv->iv", positions, dP[:, :p, :])
        return x, P, soft_ranks, jac
    return x, P, soft_ranks, None


def soft_sort(values: np.ndarray, plan: SortingNetworkPlan | None = None,
              beta: float = 10.0) -> SoftPermutation:
    """Relaxed descending sort of ``values``.

    Soft rank 1 corresponds to the largest input; padded slots sink to the
    bottom positions and are sliced away (rows renormalized).
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.isfinite(values).all():
        raise ValueError("soft_sort requires finite inputs")
    if plan is None:
        plan = build_plan(len(values))
    if len(values) != plan.p:
        raise ValueError(f"plan is for p={plan.p}, got {len(values)} values")
    _, P, soft_ranks, _ = _forward(values, plan, beta, with_jacobian=False)
    sub = P[: plan.p, : plan.p]
    row_sums = sub.sum(axis=1, keepdims=True)
    matrix = sub / row_sums
    return SoftPermutation(matrix=matrix, soft_ranks=soft_ranks, steepness=beta)


def soft_sort_gradient(values: np.ndarray, plan: SortingNetworkPlan | None = None,
                       beta: float = 10.0) -> np.ndarray:
    """Jacobian of the soft ranks w.r.t. the input values (p x p)."""
    values = np.asarray(values, dtype=np.float64)
    if plan is None:
        plan = build_plan(len(values))
    _, _, _, jac = _forward(values, plan, beta, with_jacobian=True)
    return jac


def _as_rank_array(r) -> np.ndarray:
    ranks = np.asarray(getattr(r, "ranks", r), dtype=np.float64)
    return ranks


def spearman_exact(r1, r2) -> float:
    """Spearman's rho for two tie-free integer rankings.

    Uses the closed form 1 - 6 * sum(d^2) / (n (n^2 - 1)).
    """
    a = _as_rank_array(r1)
    b = _as_rank_array(r2)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    n = len(a)
    for name, r in (("first", a), ("second", b)):
        if sorted(int(v) for v in r) != list(range(1, n + 1)):
            raise ValueError(f"{name} argument is not a permutation of 1..{n}")
    d = a - b
    return float(1.0 - 6.0 * np.sum(d * d) / (n * (n * n - 1)))


def spearman_soft(soft_ranks: np.ndarray, target) -> tuple[float, np.ndarray]:
    """Pearson correlation of soft ranks against integer target ranks.

    Returns (rho, gradient w.r.t. soft_ranks). Target rankings are tie-free
    so this coincides with Spearman's rho in the hard limit.
    """
    s = np.asarray(soft_ranks, dtype=np.float64)
    t = _as_rank_array(target)
    if s.shape != t.shape:
        raise ValueError(f"length mismatch: {s.shape} vs {t.shape}")
    sc = s - s.mean()
    tc = t - t.mean()
    ns = float(np.sqrt(np.sum(sc * sc)))
    nt = float(np.sqrt(np.sum(tc * tc)))
    if ns < 1e-12 or nt < 1e-12:
        raise DegenerateRankingError("degenerate ranking: zero variance")
    rho = float(np.dot(sc, tc) / (ns * nt))
    grad = tc / (ns * nt) - rho * sc / (ns * ns)
    return rho, grad
