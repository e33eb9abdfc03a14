"""Adam optimizer and step-decay learning-rate schedule (numpy)."""

from __future__ import annotations

import numpy as np

__all__ = ["Adam", "StepDecay"]


class Adam:
    """Standard Adam with bias correction over a list of parameter arrays."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray],
             update_mask: list[np.ndarray] | None = None) -> None:
        """In-place update; ``update_mask`` freezes entries where it is 0."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            delta = self.lr * (self.m[i] / bc1) / (np.sqrt(self.v[i] / bc2) + self.eps)
            if update_mask is not None:
                delta = delta * update_mask[i]
            p -= delta


class StepDecay:
    """Multiplies the learning rate by gamma every step_size epochs."""

    def __init__(self, base_lr: float, step_size: int = 50, gamma: float = 0.5):
        self.base_lr = base_lr
        self.step_size = step_size
        self.gamma = gamma

    def lr_at(self, epoch: int) -> float:
        return self.base_lr * self.gamma ** (epoch // self.step_size)
