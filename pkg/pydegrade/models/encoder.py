"""The degradation encoder: an aligned (LQ, HQ) pair in, a 512-d representation out."""
from __future__ import annotations

from dataclasses import dataclass

import pyro
import torch

from pydegrade.errors import ShapeError
from pydegrade.imaging.filters import resize
from pydegrade.imaging.tensor import ImageTensor
from pydegrade.nn.layers import Affine, SNConv2d, evaluation, leaky_relu

OMEGA_DIM = 512
MAX_CHANNELS = 512


@dataclass(frozen=True)
class DegNetConfig:
    base_channels: int = 64
    num_stages: int = 6
    resolution: int = 128
    # False gives the unpaired variant that only sees the LQ image.
    paired: bool = True

    def __post_init__(self):
        if self.base_channels < 1:
            raise ValueError("base_channels must be a positive integer")
        if self.num_stages < 1:
            raise ValueError("num_stages must be a positive integer")
        if self.resolution < 32:
            raise ValueError("resolution must be at least 32")

    @property
    def in_channels(self) -> int:
        return 6 if self.paired else 3

    def stage_channels(self):
        return [min(self.base_channels * 2 ** (i + 1), MAX_CHANNELS) for i in range(self.num_stages)]


class DegradationEncoder(pyro.nn.PyroModule):
    """
    Spectrally normalized stride-2 conv stages with leaky activations, global average
    pooling and one affine map to the representation.
    """

    def __init__(self, config: DegNetConfig = DegNetConfig()):
        super().__init__()
        self.config = config
        self.stem = SNConv2d(config.in_channels, config.base_channels, 3)
        stages = []
        channels = config.base_channels
        for out_channels in config.stage_channels():
            stages.append(SNConv2d(channels, out_channels, 3, stride=2))
            channels = out_channels
        self.stages = torch.nn.ModuleList(stages)
        self.head = Affine(channels, OMEGA_DIM)

    def forward(self, lq: torch.Tensor, hq: torch.Tensor) -> torch.Tensor:
        if lq.shape != hq.shape:
            raise ShapeError(
                f"LQ and HQ batches must match, got {tuple(lq.shape)} and {tuple(hq.shape)}"
            )
        x = torch.cat([lq, hq], dim=1) if self.config.paired else lq
        x = leaky_relu(self.stem(x))
        for stage in self.stages:
            x = leaky_relu(stage(x))
        return self.head(x.mean(dim=(2, 3)))


def _as_batch(img: ImageTensor, like: torch.nn.Module) -> torch.Tensor:
    dtype = next(like.parameters()).dtype
    return img.data.to(dtype).unsqueeze(0)


def extract_representation(
    lq: ImageTensor, hq: ImageTensor, encoder: DegradationEncoder, *, align: bool = True
) -> torch.Tensor:
    """
    Representation of how `hq` was degraded into `lq`, a length-512 vector.

    Args:
        lq: ImageTensor
            - The degraded image.
        hq: ImageTensor
            - The clean (or pseudo-clean) counterpart.
        encoder: DegradationEncoder
            - Evaluated in eval mode, so repeated calls give identical results.
        align: bool
            - Resize `lq` to the size of `hq` with bicubic resampling when they differ.
              When False a size mismatch raises ShapeError.
    """
    if lq.channels != hq.channels:
        raise ShapeError(f"LQ has {lq.channels} channels but HQ has {hq.channels}")
    if (lq.height, lq.width) != (hq.height, hq.width):
        if not align:
            raise ShapeError(f"LQ size {lq.shape} differs from HQ size {hq.shape}")
        lq = resize(lq, hq.height, hq.width, "bicubic")
    with evaluation(encoder):
        return encoder(_as_batch(lq, encoder), _as_batch(hq, encoder))[0]


def degnet_forward_batch(
    encoder: DegradationEncoder, lq: torch.Tensor, hq: torch.Tensor
) -> torch.Tensor:
    """Representations of a batch of aligned pairs; row n only depends on pair n."""
    if lq.dim() != 4 or lq.shape[0] == 0:
        raise ValueError("degnet_forward_batch needs a non-empty [N,C,H,W] batch")
    with evaluation(encoder):
        return encoder(lq, hq)
