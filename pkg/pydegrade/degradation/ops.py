"""
The classical degradation operations a recipe is made of.

Each op is a frozen dataclass holding fully resolved parameters; `apply_op` dispatches
on the op type to the imaging primitives.
"""
from __future__ import annotations

import functools
from dataclasses import asdict, dataclass, fields
from typing import ClassVar, Dict, Tuple, Type

from pydegrade.imaging.filters import add_gaussian_noise, gaussian_blur, resample, resize
from pydegrade.imaging.jpeg import jpeg_proxy
from pydegrade.imaging.tensor import ImageTensor


@dataclass(frozen=True)
class DegradationOp:
    kind: ClassVar[str] = ""

    def params(self) -> Dict[str, object]:
        return asdict(self)


@dataclass(frozen=True)
class BlurOp(DegradationOp):
    kind: ClassVar[str] = "blur"
    sigma_x: float
    sigma_y: float
    angle: float = 0.0


@dataclass(frozen=True)
class ResampleDownUpOp(DegradationOp):
    """Downsample by `scale`, then resample back to the input size."""

    kind: ClassVar[str] = "resample_down_up"
    scale: float
    method: str = "bicubic"


@dataclass(frozen=True)
class NoiseOp(DegradationOp):
    kind: ClassVar[str] = "noise"
    sigma: float
    mode: str = "color"
    seed: int = 0


@dataclass(frozen=True)
class JpegOp(DegradationOp):
    kind: ClassVar[str] = "jpeg"
    quality: int


@dataclass(frozen=True)
class ClipOp(DegradationOp):
    kind: ClassVar[str] = "clip"


OP_TYPES: Dict[str, Type[DegradationOp]] = {
    op_type.kind: op_type for op_type in (BlurOp, ResampleDownUpOp, NoiseOp, JpegOp, ClipOp)
}

# Kinds that take part in the shuffled order, in their canonical listing order.
SHUFFLED_KINDS: Tuple[str, ...] = ("blur", "resample_down_up", "noise", "jpeg")


def param_types(op_type: Type[DegradationOp]) -> Dict[str, type]:
    resolved = {"float": float, "int": int, "str": str}
    return {f.name: resolved[str(f.type)] for f in fields(op_type)}


@functools.singledispatch
def apply_op(op: DegradationOp, img: ImageTensor) -> ImageTensor:
    raise NotImplementedError(f"No implementation for degradation op {type(op)}")


@apply_op.register
def _apply_blur(op: BlurOp, img: ImageTensor) -> ImageTensor:
    return gaussian_blur(img, op.sigma_x, op.sigma_y, op.angle)


@apply_op.register
def _apply_resample(op: ResampleDownUpOp, img: ImageTensor) -> ImageTensor:
    small = resample(img, op.scale, op.method)  # type: ignore[arg-type]
    return resize(small, img.height, img.width, op.method)  # type: ignore[arg-type]


@apply_op.register
def _apply_noise(op: NoiseOp, img: ImageTensor) -> ImageTensor:
    return add_gaussian_noise(img, op.sigma, op.mode, op.seed)  # type: ignore[arg-type]


@apply_op.register
def _apply_jpeg(op: JpegOp, img: ImageTensor) -> ImageTensor:
    return jpeg_proxy(img, op.quality)


@apply_op.register
def _apply_clip(op: ClipOp, img: ImageTensor) -> ImageTensor:
    return img.clip()
