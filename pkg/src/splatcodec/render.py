"""Top-K normalized rendering of a :class:`GaussianSet` and its backward pass.

Pixel (row h, col w) of an H x W raster samples the continuous point
``((w + 0.5) / W, (h + 0.5) / H)``. Rasters are ``(H, W, 3)`` float arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .gaussian import GaussianSet, density

DEFAULT_K = 10
EPS_NORM = 1e-8


class EmptySetError(ValueError):
    """Raised when rendering is requested from a set with no Gaussians."""


@dataclass
class TopKSelection:
    indices: np.ndarray
    weights: np.ndarray


@dataclass
class Gradients:
    """Per-Gaussian accumulated loss gradients, shaped like the parameters."""

    mu: np.ndarray
    theta: np.ndarray
    scale: np.ndarray
    color: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "Gradients":
        return cls(np.zeros((n, 2)), np.zeros(n), np.zeros((n, 2)), np.zeros((n, 3)))

    def merge(self, other: "Gradients") -> "Gradients":
        return Gradients(self.mu + other.mu, self.theta + other.theta,
                         self.scale + other.scale, self.color + other.color)


def pixel_centers(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Flattened (u, v) pixel-centre coordinates in row-major order."""
    if width < 1 or height < 1:
        raise ValueError(f"raster size must be positive, got {width}x{height}")
    u = (np.arange(width) + 0.5) / width
    v = (np.arange(height) + 0.5) / height
    uu, vv = np.meshgrid(u, v)
    return uu.ravel(), vv.ravel()


def _require(gs: GaussianSet) -> None:
    if len(gs) == 0:
        raise EmptySetError("cannot render an empty Gaussian set")


def _points(x) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(x, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    return np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])


def render_naive(gs: GaussianSet, x) -> np.ndarray:
    """Unnormalized sum of every Gaussian's density-weighted colour at ``x``."""
    _require(gs)
    out = np.zeros(3)
    for i, g in enumerate(gs):
        out += density(g, x) * gs.colors[i]
    return out


def select_top_k(gs: GaussianSet, x, k: int = DEFAULT_K) -> TopKSelection:
    """Top-``k`` Gaussians by density at ``x``; ties go to the smaller index."""
    _require(gs)
    if k < 1:
        raise ValueError("k must be >= 1")
    xs, ys = _points(x)
    idx, w = _kernels.select_points(xs, ys, gs.means, *gs.kernel_params(), k)
    return TopKSelection(indices=idx[0], weights=w[0])


def render_points(gs: GaussianSet, points, k: int = DEFAULT_K) -> np.ndarray:
    """Unclamped top-K blend at an (P, 2) array of continuous coordinates."""
    _require(gs)
    if k < 1:
        raise ValueError("k must be >= 1")
    xs, ys = _points(points)
    return _kernels.render_points(xs, ys, gs.means, *gs.kernel_params(), gs.colors, k, EPS_NORM)


def render_topk(gs: GaussianSet, x, k: int = DEFAULT_K) -> np.ndarray:
    return render_points(gs, x, k)[0]


def render_image(gs: GaussianSet, width: int, height: int, k: int = DEFAULT_K) -> np.ndarray:
    """Render an (H, W, 3) raster clamped to [0, 1]."""
    _require(gs)
    xs, ys = pixel_centers(width, height)
    rgb = _kernels.render_points(xs, ys, gs.means, *gs.kernel_params(), gs.colors, k, EPS_NORM)
    return np.clip(rgb, 0.0, 1.0).reshape(height, width, 3)


def backward(gs: GaussianSet, points, upstream, k: int = DEFAULT_K) -> Gradients:
    """Accumulate dL/dparams given dL/dc_r at each sample point.

    The top-K membership of each sample is treated as a constant, so only
    selected Gaussians receive gradient.
    """
    _require(gs)
    xs, ys = _points(points)
    up = np.ascontiguousarray(upstream, dtype=np.float64).reshape(xs.shape[0], 3)
    if not np.all(np.isfinite(up)):
        raise ValueError("upstream gradients must be finite")
    grads = Gradients.zeros(len(gs))
    _kernels.backward_points(xs, ys, up, gs.means, *gs.kernel_params(), gs.colors, k, EPS_NORM,
                             grads.mu, grads.theta, grads.scale, grads.color)
    return grads


def l1_loss_and_grad(gs: GaussianSet, points, targets, k: int = DEFAULT_K) -> tuple[float, Gradients]:
    """Mean per-sample L1 colour error and its gradient, fused in one pass."""
    _require(gs)
    xs, ys = _points(points)
    tg = np.ascontiguousarray(targets, dtype=np.float64).reshape(xs.shape[0], 3)
    grads = Gradients.zeros(len(gs))
    loss = _kernels.l1_step(xs, ys, tg, gs.means, *gs.kernel_params(), gs.colors, k, EPS_NORM,
                            grads.mu, grads.theta, grads.scale, grads.color)
    return float(loss), grads
