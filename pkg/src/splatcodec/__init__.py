"""Images as sets of anisotropic 2D Gaussians: fitting, float16 coding, fast rendering."""

from .bsp import BspPartition, bench_render, build_partition, locate_block, render_topk_blocked
from .codec import decode, encode, quantize, size_report
from .fit import FitConfig, FitReport, fit, initialize_set
from .gaussian import Gaussian2D, GaussianSet, constrain, covariance, density, density_gradient
from .metrics import psnr, ssim
from .raster import load_image, save_image
from .render import backward, render_image, render_naive, render_topk, select_top_k

__all__ = [
    "BspPartition", "FitConfig", "FitReport", "Gaussian2D", "GaussianSet",
    "backward", "bench_render", "build_partition", "constrain", "covariance", "decode",
    "density", "density_gradient", "encode", "fit", "initialize_set", "load_image",
    "locate_block", "psnr", "quantize", "render_image", "render_naive", "render_topk",
    "render_topk_blocked", "save_image", "select_top_k", "size_report", "ssim",
]
