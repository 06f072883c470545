"""Pixel sampling distributions used to place and train Gaussians.

All distributions are ``(H, W)`` float arrays summing to one.
"""

import numpy as np
from scipy.ndimage import sobel


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {lam}")
    return lam


def image_gradient_magnitude(img) -> np.ndarray:
    """L2 norm of the Sobel-x/Sobel-y responses over all three channels."""
    img = np.asarray(img, dtype=np.float64)
    sq = np.zeros(img.shape[:2])
    # per channel: a 3-D sobel would also smooth across the colour axis
    for ch in range(img.shape[2]):
        gx = sobel(img[..., ch], axis=1, mode="nearest")
        gy = sobel(img[..., ch], axis=0, mode="nearest")
        sq += gx * gx + gy * gy
    return np.sqrt(sq)


def _normalized(weights: np.ndarray) -> np.ndarray:
    total = weights.sum()
    if total <= 0.0 or not np.isfinite(total):
        return np.full(weights.shape, 1.0 / weights.size)
    return weights / total


def gradient_mixture(img, lam: float) -> np.ndarray:
    """``(1 - lam) * |grad I| / sum|grad I| + lam / (H W)``; flat images use a uniform first term."""
    lam = _check_lambda(lam)
    g = image_gradient_magnitude(img)
    return (1.0 - lam) * _normalized(g) + lam / g.size


def init_distribution(img, lambda_init: float = 0.3) -> np.ndarray:
    return gradient_mixture(img, lambda_init)


def opt_distribution(img, lambda_opt: float = 0.8) -> np.ndarray:
    return gradient_mixture(img, lambda_opt)


def add_distribution(rendered, target) -> np.ndarray:
    """Per-pixel L1 colour error, normalized; uniform if the error is zero everywhere."""
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if rendered.shape != target.shape:
        raise ValueError(f"image dimensions differ: {rendered.shape} vs {target.shape}")
    return _normalized(np.abs(rendered - target).sum(axis=2))


class PixelSampler:
    """Inverse-CDF categorical sampler over the pixels of one distribution."""

    def __init__(self, dist: np.ndarray):
        dist = np.asarray(dist, dtype=np.float64)
        self.height, self.width = dist.shape
        cdf = np.cumsum(dist.ravel())
        self._cdf = cdf / cdf[-1]

    def indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Flat pixel indices, ``n`` draws with replacement."""
        if n < 1:
            raise ValueError("n must be >= 1")
        flat = np.searchsorted(self._cdf, rng.random(n), side="right")
        return np.minimum(flat, self._cdf.size - 1)

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(flat_indices, coords)`` with coords at pixel centres as (u, v)."""
        flat = self.indices(n, rng)
        rows, cols = np.divmod(flat, self.width)
        coords = np.stack([(cols + 0.5) / self.width, (rows + 0.5) / self.height], axis=1)
        return flat, coords


def sample_pixels(dist, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` pixel-centre coordinates (u, v) drawn from ``dist``."""
    return PixelSampler(dist).sample(n, rng)[1]
