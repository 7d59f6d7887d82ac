"""
JPEG-like compression artifacts.

`jpeg_proxy` reproduces the lossy part of baseline JPEG: YCbCr conversion, 8x8 block
DCT, quantization with the standard tables scaled by the IJG quality rule, then the
inverse. There is no chroma subsampling and no entropy coding, so results are
bit-reproducible. DC coefficients are quantized on the 8-bit grid only, so flat
regions keep their level at every quality; blocking comes from the AC terms.
"""
from __future__ import annotations

import io
from typing import Callable, Optional

import numpy as np
import torch
from PIL import Image
from scipy.fft import dctn, idctn

from pydegrade.imaging.tensor import ImageTensor, to_uint8

JpegCodec = Callable[[ImageTensor, int], ImageTensor]

BLOCK = 8

LUMINANCE_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)

CHROMINANCE_TABLE = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.float64,
)

# JFIF full-range conversion, rows produce Y, Cb, Cr
_RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168735892, -0.331264108, 0.5],
        [0.5, -0.418687589, -0.081312411],
    ]
)
_YCBCR_TO_RGB = np.linalg.inv(_RGB_TO_YCBCR)
_CHROMA_OFFSET = np.array([0.0, 128.0, 128.0])


def scaled_table(base: np.ndarray, quality: int) -> np.ndarray:
    """The IJG quality scaling rule, clamped to [1, 255]."""
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    return np.clip(np.floor((base * scale + 50.0) / 100.0), 1.0, 255.0)


def _quantize_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    height, width = plane.shape
    pad_h, pad_w = (-height) % BLOCK, (-width) % BLOCK
    padded = np.pad(plane, ((0, pad_h), (0, pad_w)), mode="edge")

    blocks = padded.reshape(padded.shape[0] // BLOCK, BLOCK, padded.shape[1] // BLOCK, BLOCK)
    blocks = blocks.transpose(0, 2, 1, 3)
    coefficients = dctn(blocks, axes=(2, 3), norm="ortho")

    steps = table.copy()
    steps[0, 0] = 1.0
    coefficients = np.round(coefficients / steps) * steps

    restored = idctn(coefficients, axes=(2, 3), norm="ortho")
    restored = restored.transpose(0, 2, 1, 3).reshape(padded.shape)
    return restored[:height, :width]


def jpeg_proxy(
    img: ImageTensor, quality: int, *, codec: Optional[JpegCodec] = None
) -> ImageTensor:
    """
    Apply JPEG-like quantization at `quality` (1..100) and clip to [0, 1].

    Pass `codec` to substitute a real encoder/decoder (see `pillow_jpeg_codec`).
    Grayscale images are treated as the luminance plane only.
    """
    if not (isinstance(quality, (int, np.integer)) and 1 <= quality <= 100):
        raise ValueError(f"quality must be an integer in 1..100, got {quality}")
    if codec is not None:
        return codec(img, int(quality)).clip()

    pixels = img.to_hwc() * 255.0
    if img.channels == 1:
        planes = [pixels[:, :, 0] - 128.0]
        tables = [scaled_table(LUMINANCE_TABLE, quality)]
    else:
        ycbcr = pixels @ _RGB_TO_YCBCR.T + _CHROMA_OFFSET - 128.0
        planes = [ycbcr[:, :, k] for k in range(3)]
        chroma = scaled_table(CHROMINANCE_TABLE, quality)
        tables = [scaled_table(LUMINANCE_TABLE, quality), chroma, chroma]

    restored = np.stack(
        [_quantize_plane(plane, table) for plane, table in zip(planes, tables)], axis=-1
    )
    if img.channels == 1:
        out = restored + 128.0
    else:
        out = (restored + 128.0 - _CHROMA_OFFSET) @ _YCBCR_TO_RGB.T

    data = torch.from_numpy(np.ascontiguousarray((out / 255.0).transpose(2, 0, 1)))
    return ImageTensor(data).clip()


def pillow_jpeg_codec(img: ImageTensor, quality: int) -> ImageTensor:
    """Round-trip through Pillow's entropy-coded JPEG encoder (8-bit quantized)."""
    array = to_uint8(img)
    pil_image = Image.fromarray(array[:, :, 0] if img.channels == 1 else array)
    buffer = io.BytesIO()
    pil_image.save(buffer, format="JPEG", quality=int(quality))
    buffer.seek(0)
    with Image.open(buffer) as decoded:
        decoded_array = np.asarray(decoded, dtype=np.float64) / 255.0
    return ImageTensor.from_hwc(decoded_array)
