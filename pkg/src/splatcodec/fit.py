"""Encoder: fit a Gaussian set to a target raster.

The schedule starts from half the budget, trains for ``warmup_iters``, then
adds an eighth of the budget every ``densify_interval`` iterations (four
times) at pixels drawn in proportion to the current reconstruction error.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .gaussian import GaussianSet, constrain_arrays
from .metrics import psnr, ssim
from .optim import Adam
from .render import DEFAULT_K, Gradients, l1_loss_and_grad, render_image
from .sampling import PixelSampler, add_distribution, init_distribution, opt_distribution

logger = logging.getLogger(__name__)

DENSIFY_STAGES = 4
PLATEAU_MIN_GAIN_DB = 0.01


class FitAborted(RuntimeError):
    pass


@dataclass
class FitConfig:
    budget: int
    k: int = DEFAULT_K
    lambda_init: float = 0.3
    lambda_opt: float = 0.8
    iterations: int = 50_000
    samples_per_iter: int = 10_000
    # learning rates for (mu, color, scale, theta)
    lr: tuple[float, float, float, float] = (2e-4, 2e-3, 1e-3, 1e-3)
    eval_interval: int = 1_000
    plateau_patience: int = 3
    lr_decay: float = 0.1
    warmup_iters: int = 10_000
    densify_interval: int = 5_000
    seed: int = 0

    def __post_init__(self):
        if self.budget < 8:
            raise ValueError(f"budget must be >= 8, got {self.budget}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        for name in ("lambda_init", "lambda_opt"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if len(self.lr) != 4 or any(not (r > 0.0) for r in self.lr):
            raise ValueError(f"learning rates must be four positive numbers, got {self.lr}")
        if not (self.lr_decay > 0.0):
            raise ValueError("lr_decay must be positive")
        for name in ("iterations", "samples_per_iter", "eval_interval", "plateau_patience",
                     "warmup_iters", "densify_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def initial_count(self) -> int:
        return self.budget // 2

    @property
    def stage_increment(self) -> int:
        return self.budget // 8

    @property
    def final_count(self) -> int:
        return self.initial_count + DENSIFY_STAGES * self.stage_increment

    def densify_iterations(self) -> list[int]:
        return [self.warmup_iters + m * self.densify_interval for m in range(DENSIFY_STAGES)]


@dataclass
class EvalRecord:
    iteration: int
    n_gaussians: int
    loss: float
    psnr: float
    ssim: float
    best_psnr: float
    lr_decayed: bool

    def to_json(self) -> str:
        d = asdict(self)
        for key in ("psnr", "ssim", "best_psnr"):
            if not math.isfinite(d[key]):
                d[key] = str(d[key])
        return json.dumps(d, sort_keys=True)


@dataclass
class LodCheckpoint:
    stage: int
    iteration: int
    gaussians: GaussianSet

    @property
    def name(self) -> str:
        return f"lod{self.stage}_n{len(self.gaussians)}"


@dataclass
class FitReport:
    history: list[EvalRecord] = field(default_factory=list)
    checkpoints: list[LodCheckpoint] = field(default_factory=list)
    decay_iteration: Optional[int] = None

    @property
    def checkpoint_names(self) -> list[str]:
        return [c.name for c in self.checkpoints]

    @property
    def final(self) -> EvalRecord:
        return self.history[-1]

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.history)


def initialize_set(img: np.ndarray, count: int, config: FitConfig,
                   rng: np.random.Generator) -> GaussianSet:
    """Place ``count`` Gaussians at pixels drawn from the init distribution."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return _spawn(img, init_distribution(img, config.lambda_init), count, rng)


def _spawn(img: np.ndarray, dist: np.ndarray, count: int, rng: np.random.Generator) -> GaussianSet:
    h, w = img.shape[:2]
    flat, coords = PixelSampler(dist).sample(count, rng)
    s0 = 2.0 / max(h, w)
    return GaussianSet(
        means=coords,
        thetas=np.zeros(count),
        scales=np.full((count, 2), s0),
        colors=img.reshape(-1, 3)[flat],
    )


_GROUPS = ("mu", "color", "scale", "theta")


def make_optimizer(config: FitConfig) -> Adam:
    return Adam(dict(zip(_GROUPS, config.lr)))


def adam_step(gs: GaussianSet, grads: Gradients, opt: Adam) -> None:
    """One Adam update over all four parameter groups, then re-apply the constraints."""
    opt.step(
        {"mu": gs.means, "color": gs.colors, "scale": gs.scales, "theta": gs.thetas},
        {"mu": grads.mu, "color": grads.color, "scale": grads.scale, "theta": grads.theta},
    )
    constrain_arrays(gs.means, gs.thetas, gs.scales, gs.colors)


def _evaluate(gs, img, k):
    h, w = img.shape[:2]
    rec = render_image(gs, w, h, k)
    try:
        s = ssim(rec, img)
    except ValueError:
        s = float("nan")
    return rec, psnr(rec, img), s


def fit(img, config: FitConfig,
        on_eval: Optional[Callable[[EvalRecord], None]] = None) -> tuple[GaussianSet, FitReport]:
    """Run the full encoder schedule on an (H, W, 3) target in [0, 1]."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3 or not np.all(np.isfinite(img)):
        raise ValueError("target must be a finite (H, W, 3) array")
    h, w = img.shape[:2]
    target = img.reshape(-1, 3)
    rng = np.random.default_rng(config.seed)

    gs = initialize_set(img, config.initial_count, config, rng)
    opt = make_optimizer(config)
    sampler = PixelSampler(opt_distribution(img, config.lambda_opt))
    densify_at = {t: m for m, t in enumerate(config.densify_iterations(), start=1)}

    report = FitReport()
    best = -math.inf
    stall = 0
    decayed = False
    loss_sum = 0.0
    loss_count = 0
    rendered = None

    for it in range(1, config.iterations + 1):
        flat, coords = sampler.sample(config.samples_per_iter, rng)
        loss, grads = l1_loss_and_grad(gs, coords, target[flat], config.k)
        if not math.isfinite(loss):
            raise FitAborted(f"non-finite loss at iteration {it}")
        adam_step(gs, grads, opt)
        loss_sum += loss
        loss_count += 1
        rendered = None

        if it % config.eval_interval == 0 or it == config.iterations:
            rendered, p, s = _evaluate(gs, img, config.k)
            if p >= best + PLATEAU_MIN_GAIN_DB:
                stall = 0
            else:
                stall += 1
            best = max(best, p)
            if not decayed and stall >= config.plateau_patience:
                opt.scale_lr(config.lr_decay)
                decayed = True
                report.decay_iteration = it
                logger.info("learning rates decayed at iteration %d", it)
            rec = EvalRecord(it, len(gs), loss_sum / loss_count, p, s, best, decayed)
            loss_sum, loss_count = 0.0, 0
            report.history.append(rec)
            logger.info("it=%d n=%d loss=%.5f psnr=%.3f ssim=%.4f", it, len(gs), rec.loss, p, s)
            if on_eval is not None:
                on_eval(rec)

        if it in densify_at and it < config.iterations:
            report.checkpoints.append(LodCheckpoint(densify_at[it] - 1, it, gs.copy()))
            if rendered is None:
                rendered = render_image(gs, w, h, config.k)
            extra = _spawn(img, add_distribution(rendered, img), config.stage_increment, rng)
            gs = gs.concat(extra)
            opt.grow(len(extra))
            logger.info("densified to %d Gaussians at iteration %d", len(gs), it)

    report.checkpoints.append(LodCheckpoint(len(report.checkpoints), config.iterations, gs.copy()))
    return gs, report
