"""Anisotropic 2D Gaussian primitive and parameter bounds.

Gaussians live in the normalized image domain [0, 1]^2 with u horizontal and
v vertical. A :class:`GaussianSet` stores the whole representation as
struct-of-arrays so the renderer kernels can consume it without copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

SCALE_MIN = 1e-4
SCALE_MAX = 2.0


class InvalidParameterError(ValueError):
    """Raised for non-finite or out-of-domain Gaussian parameters."""


@dataclass(frozen=True)
class Gaussian2D:
    mu: tuple[float, float]
    theta: float
    scale: tuple[float, float]
    color: tuple[float, float, float]

    def as_vector(self) -> np.ndarray:
        """The 8 trainable parameters in storage order (mu, theta, scale, color)."""
        return np.array([*self.mu, self.theta, *self.scale, *self.color], dtype=np.float64)


@dataclass(frozen=True)
class DensityGradient:
    d_mu: np.ndarray
    d_theta: float
    d_scale: np.ndarray


def _check_scale(scale) -> tuple[float, float]:
    s1, s2 = float(scale[0]), float(scale[1])
    if not (math.isfinite(s1) and math.isfinite(s2)) or s1 <= 0.0 or s2 <= 0.0:
        raise InvalidParameterError(f"scale must be finite and positive, got {scale!r}")
    return s1, s2


def covariance(theta: float, scale) -> np.ndarray:
    """Return ``R S S^T R^T`` for rotation ``theta`` and axis scales ``scale``."""
    s1, s2 = _check_scale(scale)
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    sig = rot @ np.diag([s1 * s1, s2 * s2]) @ rot.T
    # exact symmetry; the two off-diagonal products can differ by an ulp
    off = 0.5 * (sig[0, 1] + sig[1, 0])
    sig[0, 1] = sig[1, 0] = off
    return sig


def _local(g: Gaussian2D, x) -> tuple[float, float, float, float, float, float]:
    dx = float(x[0]) - g.mu[0]
    dy = float(x[1]) - g.mu[1]
    c, s = math.cos(g.theta), math.sin(g.theta)
    # coordinates along the Gaussian's principal axes
    p1 = c * dx + s * dy
    p2 = -s * dx + c * dy
    return p1, p2, c, s, dx, dy


def density(g: Gaussian2D, x) -> float:
    """Unnormalized Gaussian density ``exp(-0.5 * mahalanobis^2)`` at ``x``.

    The inverse covariance is applied in closed form: rotate into the
    principal frame, divide by the scales, and take the squared norm.
    """
    s1, s2 = _check_scale(g.scale)
    p1, p2, *_ = _local(g, x)
    a, b = p1 / s1, p2 / s2
    return math.exp(-0.5 * (a * a + b * b))


def density_gradient(g: Gaussian2D, x) -> DensityGradient:
    """Analytic partials of :func:`density` w.r.t. mu, theta and scale."""
    s1, s2 = _check_scale(g.scale)
    p1, p2, c, s, _, _ = _local(g, x)
    inv1, inv2 = 1.0 / (s1 * s1), 1.0 / (s2 * s2)
    d = math.exp(-0.5 * (p1 * p1 * inv1 + p2 * p2 * inv2))
    w1, w2 = p1 * inv1, p2 * inv2
    d_mu = d * np.array([c * w1 - s * w2, s * w1 + c * w2])
    d_theta = -d * p1 * p2 * (inv1 - inv2)
    d_scale = d * np.array([p1 * p1 * inv1 / s1, p2 * p2 * inv2 / s2])
    return DensityGradient(d_mu=d_mu, d_theta=d_theta, d_scale=d_scale)


def _wrap_theta(theta):
    t = np.mod(theta, np.pi)
    # np.mod can return exactly pi for tiny negative inputs
    return np.where(t >= np.pi, 0.0, t)


def constrain(g: Gaussian2D) -> Gaussian2D:
    """Project raw parameters back onto the valid domain (idempotent)."""
    v = g.as_vector()
    if not np.all(np.isfinite(v)):
        raise InvalidParameterError(f"non-finite Gaussian parameters: {v}")
    mu = np.clip(v[0:2], 0.0, 1.0)
    theta = float(_wrap_theta(v[2]))
    scale = np.clip(v[3:5], SCALE_MIN, SCALE_MAX)
    color = np.clip(v[5:8], 0.0, 1.0)
    return Gaussian2D(
        mu=(float(mu[0]), float(mu[1])),
        theta=theta,
        scale=(float(scale[0]), float(scale[1])),
        color=(float(color[0]), float(color[1]), float(color[2])),
    )


@dataclass
class GaussianSet:
    """Ordered collection of Gaussians; the index of each entry is its identity.

    Attributes:
        means: (N, 2) positions in [0, 1]^2.
        thetas: (N,) rotation angles in [0, pi).
        scales: (N, 2) per-axis standard deviations.
        colors: (N, 3) RGB in [0, 1].
    """

    means: np.ndarray
    thetas: np.ndarray
    scales: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        self.means = np.ascontiguousarray(self.means, dtype=np.float64).reshape(-1, 2)
        n = self.means.shape[0]
        self.thetas = np.ascontiguousarray(self.thetas, dtype=np.float64).reshape(n)
        self.scales = np.ascontiguousarray(self.scales, dtype=np.float64).reshape(n, 2)
        self.colors = np.ascontiguousarray(self.colors, dtype=np.float64).reshape(n, 3)

    @classmethod
    def empty(cls) -> "GaussianSet":
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)), np.zeros((0, 3)))

    @classmethod
    def from_gaussians(cls, gaussians: Iterable[Gaussian2D]) -> "GaussianSet":
        rows = [g.as_vector() for g in gaussians]
        if not rows:
            return cls.empty()
        return cls.from_matrix(np.stack(rows))

    @classmethod
    def from_matrix(cls, params: np.ndarray) -> "GaussianSet":
        """Build from an (N, 8) matrix laid out as (mu_u, mu_v, theta, s1, s2, r, g, b)."""
        params = np.asarray(params, dtype=np.float64).reshape(-1, 8)
        return cls(params[:, 0:2], params[:, 2], params[:, 3:5], params[:, 5:8])

    def to_matrix(self) -> np.ndarray:
        return np.concatenate(
            [self.means, self.thetas[:, None], self.scales, self.colors], axis=1
        )

    def __len__(self) -> int:
        return self.means.shape[0]

    def __getitem__(self, i: int) -> Gaussian2D:
        return Gaussian2D(
            mu=(float(self.means[i, 0]), float(self.means[i, 1])),
            theta=float(self.thetas[i]),
            scale=(float(self.scales[i, 0]), float(self.scales[i, 1])),
            color=tuple(float(c) for c in self.colors[i]),
        )

    def __iter__(self) -> Iterator[Gaussian2D]:
        return (self[i] for i in range(len(self)))

    def copy(self) -> "GaussianSet":
        return GaussianSet(self.means.copy(), self.thetas.copy(), self.scales.copy(), self.colors.copy())

    def concat(self, other: "GaussianSet") -> "GaussianSet":
        return GaussianSet(
            np.concatenate([self.means, other.means]),
            np.concatenate([self.thetas, other.thetas]),
            np.concatenate([self.scales, other.scales]),
            np.concatenate([self.colors, other.colors]),
        )

    def permuted(self, order) -> "GaussianSet":
        order = np.asarray(order)
        return GaussianSet(self.means[order], self.thetas[order], self.scales[order], self.colors[order])

    def constrained(self) -> "GaussianSet":
        out = self.copy()
        constrain_arrays(out.means, out.thetas, out.scales, out.colors)
        return out

    def kernel_params(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Per-Gaussian (cos, sin, 1/s1, 1/s2) in the layout the render kernels use."""
        if np.any(~np.isfinite(self.scales)) or np.any(self.scales <= 0.0):
            raise InvalidParameterError("scales must be finite and positive")
        return (
            np.cos(self.thetas),
            np.sin(self.thetas),
            1.0 / self.scales[:, 0],
            1.0 / self.scales[:, 1],
        )


def constrain_arrays(means, thetas, scales, colors) -> None:
    """In-place vectorized :func:`constrain` over struct-of-arrays parameters."""
    for name, arr in (("mu", means), ("theta", thetas), ("scale", scales), ("color", colors)):
        bad = ~np.isfinite(arr)
        if bad.any():
            idx = int(np.argwhere(bad)[0][0])
            raise InvalidParameterError(f"non-finite {name} for Gaussian {idx}")
    np.clip(means, 0.0, 1.0, out=means)
    thetas[:] = _wrap_theta(thetas)
    np.clip(scales, SCALE_MIN, SCALE_MAX, out=scales)
    np.clip(colors, 0.0, 1.0, out=colors)
