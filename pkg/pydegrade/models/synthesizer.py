"""
The degradation-conditioned generator. Content features come from the HQ image only;
the representation reaches the image solely through the mapping network and the
per-block style affines of the modulated convolutions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pyro
import torch
import torch.nn.functional as F

from pydegrade.errors import ShapeError
from pydegrade.imaging.tensor import ImageTensor
from pydegrade.models.encoder import OMEGA_DIM
from pydegrade.nn.layers import Affine, Conv2d, evaluation, leaky_relu
from pydegrade.nn.modulated import MCBlock

W_DIM = 512
MIN_CROP = 32
NUM_SCALES = 3


@dataclass(frozen=True)
class SynNetConfig:
    mapping_depth: int = 4
    num_mcblocks: int = 6
    content_channels: int = 64

    def __post_init__(self):
        if self.mapping_depth < 1:
            raise ValueError("mapping_depth must be a positive integer")
        if self.num_mcblocks < 1:
            raise ValueError("num_mcblocks must be a positive integer")
        if self.content_channels < 1:
            raise ValueError("content_channels must be a positive integer")


class MappingNetwork(pyro.nn.PyroModule):
    def __init__(self, depth: int = 4):
        super().__init__()
        dims = [OMEGA_DIM] + [W_DIM] * depth
        self.layers = torch.nn.ModuleList(Affine(a, b) for a, b in zip(dims[:-1], dims[1:]))

    def forward(self, omega: torch.Tensor) -> torch.Tensor:
        w = omega
        for layer in self.layers:
            w = leaky_relu(layer(w))
        return w


class ContentEncoder(pyro.nn.PyroModule):
    """Three feature scales (full, 1/2, 1/4) at a constant width."""

    def __init__(self, channels: int):
        super().__init__()
        self.stem = Conv2d(3, channels, 3)
        self.down = torch.nn.ModuleList(Conv2d(channels, channels, 3, stride=2) for _ in range(2))

    def forward(self, hq: torch.Tensor):
        features = [leaky_relu(self.stem(hq))]
        for down in self.down:
            features.append(leaky_relu(down(features[-1])))
        return features


class SynthesisNetwork(pyro.nn.PyroModule):
    def __init__(self, config: SynNetConfig = SynNetConfig()):
        super().__init__()
        self.config = config
        c = config.content_channels
        self.mapping = MappingNetwork(config.mapping_depth)
        self.content = ContentEncoder(c)
        # Coarsest scale first; np.array_split spreads the blocks as evenly as possible.
        self.groups = torch.nn.ModuleList(
            torch.nn.ModuleList(MCBlock(c, c, W_DIM) for _ in group)
            for group in np.array_split(np.arange(config.num_mcblocks), NUM_SCALES)
        )
        self.to_rgb = MCBlock(c, 3, W_DIM, kernel_size=1, demodulate=False, activate=False)

    def map_to_w(self, omega: torch.Tensor) -> torch.Tensor:
        return self.mapping(omega)

    def forward(self, hq: torch.Tensor, omega: torch.Tensor) -> torch.Tensor:
        if omega.dim() != 2 or omega.shape != (hq.shape[0], OMEGA_DIM):
            raise ShapeError(
                f"Expected representations of shape {(hq.shape[0], OMEGA_DIM)}, "
                f"got {tuple(omega.shape)}"
            )
        w = self.map_to_w(omega)
        skips = self.content(hq)
        x = skips[-1]
        for i, group in enumerate(self.groups):
            if i > 0:
                skip = skips[-1 - i]
                x = F.interpolate(x, size=skip.shape[-2:], mode="bilinear", align_corners=False)
                x = x + skip
            for block in group:
                x = block(x, w)
        return hq + self.to_rgb(x, w)


def map_to_w(omega: torch.Tensor, synnet: SynthesisNetwork) -> torch.Tensor:
    """W-space style vector of a single representation (or a batch of them)."""
    if omega.shape[-1] != OMEGA_DIM:
        raise ShapeError(f"Representations have length {OMEGA_DIM}, got {omega.shape[-1]}")
    return synnet.map_to_w(omega)


def synthesize_batch(
    synnet: SynthesisNetwork, hq: torch.Tensor, omega: torch.Tensor, *, clip: bool = True
) -> torch.Tensor:
    if min(hq.shape[-2:]) < MIN_CROP:
        raise ValueError(f"Crops must be at least {MIN_CROP} pixels on each side")
    with evaluation(synnet):
        out = synnet(hq, omega)
    return out.clamp(0.0, 1.0) if clip else out


def synthesize(hq: ImageTensor, omega: torch.Tensor, synnet: SynthesisNetwork) -> ImageTensor:
    """
    Degrade `hq` the way `omega` describes. The output has the size of `hq` and is
    clipped to [0, 1].

    Args:
        hq: ImageTensor
            - Clean RGB crop, at least 32 pixels on each side.
        omega: torch.Tensor
            - Degradation representation of length 512.
        synnet: SynthesisNetwork
            - Generator, evaluated in eval mode.
    """
    if hq.channels != 3:
        raise ShapeError("synthesize expects an RGB image")
    dtype = next(synnet.parameters()).dtype
    with torch.no_grad():
        out = synthesize_batch(
            synnet, hq.data.to(dtype).unsqueeze(0), omega.to(dtype).reshape(1, -1)
        )
    return ImageTensor(out[0])


def synthesize_natural(
    hq_natural: ImageTensor, omega_from_face: torch.Tensor, synnet: SynthesisNetwork
) -> ImageTensor:
    """Transfer a degradation learned on a face pair onto a natural image."""
    return synthesize(hq_natural, omega_from_face, synnet)
