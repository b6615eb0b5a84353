"""HRTEM nucleation image denoising toolkit.

Thin wrapper over the native core: dataset synthesis (Poisson-disk atoms,
Perlin vacuum masks, Gaussian rendering, calibrated sensor noise), the
statistical characteristic-guided denoising network, classical baselines,
and image quality metrics.
"""

from ._core import (
    ConfigError,
    FitError,
    IoError,
    Model,
    ShapeError,
    UsageError,
    add_noise,
    calibrate,
    gaussian_filter,
    generate_dataset,
    iou,
    local_sd,
    localize,
    make_sample,
    perlin_mask,
    poisson_disk,
    psnr,
    read_tensor,
    render_ground_truth,
    sigma_p,
    ssim,
    train,
    write_tensor,
)

__all__ = [
    "ConfigError",
    "FitError",
    "IoError",
    "Model",
    "ShapeError",
    "UsageError",
    "add_noise",
    "calibrate",
    "gaussian_filter",
    "generate_dataset",
    "iou",
    "local_sd",
    "localize",
    "make_sample",
    "perlin_mask",
    "poisson_disk",
    "psnr",
    "read_tensor",
    "render_ground_truth",
    "sigma_p",
    "ssim",
    "train",
    "write_tensor",
]

__version__ = "0.1.0"
