"""
Deterministic image-processing primitives.

All borders use reflect (mirror without edge repetition) index mapping, including
kernels wider than the image. Every op is pure: given the same inputs (seeds
included) it returns bit-identical outputs; convolutions accumulate in float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from pydegrade.imaging.tensor import ImageTensor

ResampleMethod = Literal["nearest", "bilinear", "bicubic"]
NoiseMode = Literal["gray", "color"]

RESAMPLE_METHODS = ("nearest", "bilinear", "bicubic")
BICUBIC_A = -0.5


def reflect_indices(size: int, positions: torch.Tensor) -> torch.Tensor:
    """Map arbitrary integer positions into [0, size) by repeated mirroring."""
    if size == 1:
        return torch.zeros_like(positions)
    period = 2 * (size - 1)
    folded = torch.remainder(positions, period)
    return torch.where(folded >= size, period - folded, folded)


def _reflect_pad(data: torch.Tensor, pad_y: int, pad_x: int) -> torch.Tensor:
    height, width = data.shape[-2:]
    rows = reflect_indices(height, torch.arange(-pad_y, height + pad_y))
    cols = reflect_indices(width, torch.arange(-pad_x, width + pad_x))
    return data.index_select(-2, rows).index_select(-1, cols)


def gaussian_kernel(
    sigma_x: float, sigma_y: float, angle: float = 0.0
) -> torch.Tensor:
    """
    Unit-sum anisotropic Gaussian kernel of size 2*ceil(3*max(sigma_x, sigma_y)) + 1.

    `angle` rotates the sigma_x axis counter-clockwise from the image x axis (columns).
    """
    if sigma_x <= 0 or sigma_y <= 0:
        raise ValueError(f"sigmas must be positive, got ({sigma_x}, {sigma_y})")

    radius = int(math.ceil(3.0 * max(sigma_x, sigma_y)))
    offsets = torch.arange(-radius, radius + 1, dtype=torch.float64)
    y, x = torch.meshgrid(offsets, offsets, indexing="ij")
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    u = cos_a * x + sin_a * y
    v = -sin_a * x + cos_a * y
    kernel = torch.exp(-(u**2) / (2.0 * sigma_x**2) - v**2 / (2.0 * sigma_y**2))
    return kernel / kernel.sum()


def gaussian_blur(
    img: ImageTensor, sigma_x: float, sigma_y: float, angle: float = 0.0
) -> ImageTensor:
    kernel = gaussian_kernel(sigma_x, sigma_y, angle)
    radius = kernel.shape[-1] // 2
    channels = img.channels

    padded = _reflect_pad(img.data, radius, radius).unsqueeze(0)
    weight = kernel.expand(channels, 1, *kernel.shape).contiguous()
    out = F.conv2d(padded, weight, groups=channels)
    return ImageTensor(out[0])


def _cubic(t: torch.Tensor, a: float = BICUBIC_A) -> torch.Tensor:
    t = t.abs()
    t2, t3 = t**2, t**3
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    return torch.where(t <= 1.0, near, torch.where(t < 2.0, far, torch.zeros_like(t)))


def resample_matrix(in_size: int, out_size: int, method: ResampleMethod) -> torch.Tensor:
    """
    [out_size, in_size] interpolation matrix using half-pixel centres:
    source = (target + 0.5) * in_size / out_size - 0.5. No anti-aliasing is applied.
    """
    ratio = in_size / out_size
    targets = torch.arange(out_size, dtype=torch.float64)
    source = (targets + 0.5) * ratio - 0.5
    matrix = torch.zeros(out_size, in_size, dtype=torch.float64)

    if method == "nearest":
        index = torch.floor((targets + 0.5) * ratio).long().clamp(0, in_size - 1)
        matrix[torch.arange(out_size), index] = 1.0
        return matrix

    if method == "bilinear":
        base = torch.floor(source)
        taps = [(0, 1.0 - (source - base)), (1, source - base)]
    elif method == "bicubic":
        base = torch.floor(source)
        taps = [(k, _cubic(source - (base + k))) for k in (-1, 0, 1, 2)]
    else:
        raise ValueError(f"Unknown resample method {method}; choose from {RESAMPLE_METHODS}")

    rows = torch.arange(out_size)
    for offset, weight in taps:
        columns = reflect_indices(in_size, base.long() + offset)
        matrix.index_put_((rows, columns), weight, accumulate=True)
    return matrix


def resample(
    img: ImageTensor, scale: float, method: ResampleMethod = "bicubic"
) -> ImageTensor:
    return resize(img, round(scale * img.height), round(scale * img.width), method)


def resize(
    img: ImageTensor, height: int, width: int, method: ResampleMethod = "bicubic"
) -> ImageTensor:
    if method not in RESAMPLE_METHODS:
        raise ValueError(f"Unknown resample method {method}; choose from {RESAMPLE_METHODS}")
    if height < 1 or width < 1:
        raise ValueError(f"Resampling to {height}x{width} leaves an empty image")
    if (height, width) == (img.height, img.width):
        return ImageTensor(img.data.clone())

    rows = resample_matrix(img.height, height, method)
    cols = resample_matrix(img.width, width, method)
    return ImageTensor(torch.einsum("oh,chw,pw->cop", rows, img.data, cols))


def add_gaussian_noise(
    img: ImageTensor, sigma: float, mode: NoiseMode = "color", seed: int = 0
) -> ImageTensor:
    """
    Add zero-mean Gaussian noise with standard deviation `sigma` (in [0, 1] units).

    In gray mode a single noise plane is shared by every channel. The output is not
    clipped; clipping happens once at the end of a degradation recipe.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if mode not in ("gray", "color"):
        raise ValueError(f"Unknown noise mode {mode}")
    if sigma == 0:
        return ImageTensor(img.data.clone())

    generator = torch.Generator().manual_seed(int(seed))
    planes = 1 if mode == "gray" else img.channels
    noise = torch.randn(
        planes, img.height, img.width, generator=generator, dtype=torch.float64
    )
    return ImageTensor(img.data + sigma * noise)


class CropBox(NamedTuple):
    top: int
    left: int
    height: int
    width: int


@dataclass(frozen=True)
class AugmentParams:
    rotation_quarter_turns: int = 0
    rescale: float = 1.0
    crop: Optional[CropBox] = None


def augment(
    img: ImageTensor,
    rotation_quarter_turns: int = 0,
    rescale: float = 1.0,
    crop: Optional[Union[CropBox, Tuple[int, int, int, int]]] = None,
) -> ImageTensor:
    """
    Rotate by quarter turns (counter-clockwise), resample bicubically, then crop.

    Applying the same parameters to both images of an aligned pair keeps them aligned.
    `crop` is (top, left, height, width) in post-rescale coordinates; None keeps the frame.
    """
    if rotation_quarter_turns not in (0, 1, 2, 3):
        raise ValueError(
            f"rotation_quarter_turns must be in 0..3, got {rotation_quarter_turns}"
        )

    out = img
    if rotation_quarter_turns:
        out = ImageTensor(torch.rot90(out.data, rotation_quarter_turns, dims=(1, 2)))
    if rescale != 1.0:
        out = resample(out, rescale, "bicubic")
    if crop is not None:
        top, left, height, width = crop
        if (
            top < 0
            or left < 0
            or height < 1
            or width < 1
            or top + height > out.height
            or left + width > out.width
        ):
            raise ValueError(
                f"Crop {tuple(crop)} lies outside the {out.height}x{out.width} frame"
            )
        out = ImageTensor(out.data[:, top : top + height, left : left + width])
    return out


def apply_augmentation(img: ImageTensor, params: AugmentParams) -> ImageTensor:
    return augment(img, params.rotation_quarter_turns, params.rescale, params.crop)


def random_augmentation(
    height: int,
    width: int,
    crop_size: int,
    seed: Union[int, np.random.Generator],
    *,
    rescale_range: Tuple[float, float] = (0.75, 1.25),
) -> AugmentParams:
    """
    Draw rotation, rescale and crop parameters for an image of the given size.

    The rescale factor is raised when needed so the crop always fits.
    """
    rng = np.random.default_rng(seed)
    turns = int(rng.integers(0, 4))
    rot_h, rot_w = (width, height) if turns % 2 else (height, width)

    minimum = crop_size / min(rot_h, rot_w)
    rescale = float(rng.uniform(*rescale_range))
    if round(rescale * rot_h) < crop_size or round(rescale * rot_w) < crop_size:
        rescale = max(rescale, minimum)
    if abs(rescale - 1.0) < 1e-12:
        rescale = 1.0

    out_h, out_w = round(rescale * rot_h), round(rescale * rot_w)
    top = int(rng.integers(0, out_h - crop_size + 1))
    left = int(rng.integers(0, out_w - crop_size + 1))
    return AugmentParams(turns, rescale, CropBox(top, left, crop_size, crop_size))
