"""Adam over named parameter groups, each with its own learning rate."""

from __future__ import annotations

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, group: str, index: int):
        super().__init__(f"non-finite gradient for parameter {group!r} of Gaussian {index}")
        self.group = group
        self.index = index


class Adam:
    """Bias-corrected Adam (Kingma & Ba) acting in place on numpy arrays.

    Args:
        lrs: learning rate per group name.
        betas: exponential decay rates for the first and second moments.
        eps: denominator floor.
    """

    def __init__(self, lrs: dict[str, float], betas=(0.9, 0.999), eps: float = 1e-8):
        self.lrs = dict(lrs)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def scale_lr(self, factor: float) -> None:
        for name in self.lrs:
            self.lrs[name] *= factor

    def grow(self, extra: int) -> None:
        """Append zero moments for ``extra`` new rows in every group."""
        for store in (self.m, self.v):
            for name, arr in store.items():
                pad = np.zeros((extra,) + arr.shape[1:])
                store[name] = np.concatenate([arr, pad])

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            bad = ~np.isfinite(g)
            if bad.any():
                raise NonFiniteGradientError(name, int(np.argwhere(bad)[0][0]))
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lrs[name] * (m / c1) / (np.sqrt(v / c2) + self.eps)
