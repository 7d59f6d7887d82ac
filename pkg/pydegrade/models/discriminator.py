from __future__ import annotations

from dataclasses import dataclass

import pyro
import torch

from pydegrade.errors import ShapeError
from pydegrade.models.encoder import MAX_CHANNELS, OMEGA_DIM
from pydegrade.nn.layers import Affine, SNConv2d, leaky_relu


@dataclass(frozen=True)
class DiscriminatorConfig:
    base_channels: int = 64
    num_stages: int = 4
    # Number of constant planes the representation is broadcast to.
    omega_planes: int = 1

    def __post_init__(self):
        if self.base_channels < 1 or self.num_stages < 1 or self.omega_planes < 1:
            raise ValueError("DiscriminatorConfig fields must be positive integers")


class ConditionalDiscriminator(pyro.nn.PyroModule):
    """
    Scores a candidate LQ image given the HQ image it came from and the
    representation that drove it. Every convolution is spectrally normalized.
    """

    def __init__(self, config: DiscriminatorConfig = DiscriminatorConfig()):
        super().__init__()
        self.config = config
        self.omega_affine = Affine(OMEGA_DIM, config.omega_planes)
        layers = [SNConv2d(6 + config.omega_planes, config.base_channels, 3)]
        channels = config.base_channels
        for i in range(config.num_stages):
            out_channels = min(config.base_channels * 2 ** (i + 1), MAX_CHANNELS)
            layers.append(SNConv2d(channels, out_channels, 3, stride=2))
            channels = out_channels
        self.layers = torch.nn.ModuleList(layers)
        self.score = SNConv2d(channels, 1, 3)

    def forward(self, candidate: torch.Tensor, hq: torch.Tensor, omega: torch.Tensor) -> torch.Tensor:
        if candidate.shape != hq.shape:
            raise ShapeError(
                f"Candidate and HQ must match, got {tuple(candidate.shape)} and {tuple(hq.shape)}"
            )
        n, _, h, w = hq.shape
        planes = self.omega_affine(omega).reshape(n, -1, 1, 1).expand(-1, -1, h, w)
        x = torch.cat([candidate, hq, planes], dim=1)
        for layer in self.layers:
            x = leaky_relu(layer(x))
        return self.score(x).mean(dim=(1, 2, 3))
