from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np
import torch
from PIL import Image

from pydegrade.errors import ImageFormatError, ShapeError

PathLike = Union[str, os.PathLike]

_SUPPORTED_MODES = {"L": 1, "RGB": 3}


@dataclass(frozen=True, eq=False)
class ImageTensor:
    """
    A dense image stored as a float64 tensor of shape [C, H, W] with C in {1, 3}.

    Values are in [0, 1] after `load_image`; intermediate pipeline results may leave
    that range (noise is added before the recipe-level clip). Instances are treated as
    immutable: no operation in this package writes into `data`.
    """

    data: torch.Tensor

    def __post_init__(self):
        data = torch.as_tensor(self.data)
        if data.ndim != 3:
            raise ShapeError(f"ImageTensor expects [C, H, W], got shape {tuple(data.shape)}")
        if data.shape[0] not in (1, 3):
            raise ShapeError(f"ImageTensor expects 1 or 3 channels, got {data.shape[0]}")
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise ShapeError(f"ImageTensor needs H, W >= 1, got {tuple(data.shape)}")
        object.__setattr__(self, "data", data.detach().to(torch.float64).contiguous())

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self):
        return tuple(self.data.shape)

    def numpy(self) -> np.ndarray:
        return self.data.numpy().copy()

    def clip(self) -> "ImageTensor":
        return ImageTensor(self.data.clamp(0.0, 1.0))

    @classmethod
    def from_hwc(cls, array: np.ndarray) -> "ImageTensor":
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2:
            array = array[:, :, None]
        return cls(torch.from_numpy(np.ascontiguousarray(array.transpose(2, 0, 1))))

    def to_hwc(self) -> np.ndarray:
        return self.data.permute(1, 2, 0).numpy().copy()

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageTensor):
            return NotImplemented
        return self.shape == other.shape and bool(torch.equal(self.data, other.data))


def load_image(path: PathLike) -> ImageTensor:
    """
    Load an 8-bit PNG (RGB or grayscale) as an ImageTensor with values in [0, 1].
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"No image at {path}")

    with Image.open(path) as pil_image:
        if pil_image.format != "PNG":
            raise ImageFormatError(f"{path} is {pil_image.format}, only PNG is supported")
        if pil_image.mode not in _SUPPORTED_MODES:
            raise ImageFormatError(
                f"{path} has mode {pil_image.mode}; only 8-bit L and RGB are supported"
            )
        array = np.asarray(pil_image, dtype=np.uint8)

    return ImageTensor.from_hwc(array.astype(np.float64) / 255.0)


def to_uint8(img: ImageTensor) -> np.ndarray:
    return np.round(np.clip(img.to_hwc(), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(img: ImageTensor, path: PathLike) -> None:
    """Write an ImageTensor as an 8-bit PNG, clipping to [0, 1] and rounding."""
    array = to_uint8(img)
    if img.channels == 1:
        pil_image = Image.fromarray(array[:, :, 0])
    else:
        pil_image = Image.fromarray(array)
    pil_image.save(path, format="PNG")


def stack_images(images: Sequence[ImageTensor], dtype=torch.float32) -> torch.Tensor:
    """Stack same-shape images into a [N, C, H, W] batch for the networks."""
    if len(images) == 0:
        raise ValueError("Cannot stack an empty list of images")
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise ShapeError(f"Cannot stack images of different shapes: {sorted(shapes)}")
    return torch.stack([img.data for img in images]).to(dtype)


def unstack_images(batch: torch.Tensor) -> List[ImageTensor]:
    return [ImageTensor(sample) for sample in batch.detach()]
