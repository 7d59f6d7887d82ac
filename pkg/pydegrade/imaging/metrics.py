from __future__ import annotations

import math
from typing import Callable, Dict

import torch
import torch.nn.functional as F

from pydegrade.errors import ShapeError
from pydegrade.imaging.tensor import ImageTensor

Metric = Callable[[ImageTensor, ImageTensor], float]

PSNR_CAP = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

_LUMA = (0.299, 0.587, 0.114)


def _check_same_shape(a: ImageTensor, b: ImageTensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"Images differ in shape: {a.shape} vs {b.shape}")


def psnr(a: ImageTensor, b: ImageTensor) -> float:
    """Peak signal-to-noise ratio in dB for peak value 1.0; identical images give 99."""
    _check_same_shape(a, b)
    mse = float(torch.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return 10.0 * math.log10(1.0 / mse)


def luminance(img: ImageTensor) -> torch.Tensor:
    if img.channels == 1:
        return img.data[0]
    r, g, b = img.data
    return _LUMA[0] * r + _LUMA[1] * g + _LUMA[2] * b


def ssim_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> torch.Tensor:
    offsets = torch.arange(size, dtype=torch.float64) - (size - 1) / 2.0
    profile = torch.exp(-(offsets**2) / (2.0 * sigma**2))
    window = torch.outer(profile, profile)
    return window / window.sum()


def ssim(a: ImageTensor, b: ImageTensor) -> float:
    """
    Mean structural similarity on luminance over all valid 11x11 window positions
    (Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1).
    """
    _check_same_shape(a, b)
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise ValueError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.height}x{a.width}"
        )

    x = luminance(a)[None, None]
    y = luminance(b)[None, None]
    window = ssim_window()[None, None]

    def filt(t: torch.Tensor) -> torch.Tensor:
        return F.conv2d(t, window)

    mu_x, mu_y = filt(x), filt(y)
    var_x = filt(x * x) - mu_x * mu_x
    var_y = filt(y * y) - mu_y * mu_y
    cov = filt(x * y) - mu_x * mu_y

    c1, c2 = SSIM_K1**2, SSIM_K2**2
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(torch.mean(numerator / denominator))


# Full-reference metrics available to `evaluate_pairs`. Learned metrics such as LPIPS
# need externally fitted weights and are added with `register_metric`.
_METRICS: Dict[str, Metric] = {"psnr": psnr, "ssim": ssim}


def register_metric(name: str, metric: Metric) -> None:
    _METRICS[name] = metric


def compile_metric(name: str) -> Metric:
    if name not in _METRICS:
        raise NotImplementedError(
            f"Metric {name} not implemented. Please select from one of the following: "
            f"{sorted(_METRICS.keys())}"
        )
    return _METRICS[name]
