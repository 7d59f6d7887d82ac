from __future__ import annotations

import math

import pyro
import torch
import torch.nn.functional as F

from pydegrade.errors import ShapeError
from pydegrade.nn.layers import Affine, leaky_relu

DEMODULATION_EPS = 1e-8


def modulated_conv(
    content: torch.Tensor,
    style: torch.Tensor,
    weight: torch.Tensor,
    demodulate: bool = True,
) -> torch.Tensor:
    """
    Convolve each sample of `content` with `weight` scaled along its input channels by
    that sample's `style`. With `demodulate`, every output filter of every sample is
    rescaled to unit L2 norm. Stride 1 with same padding.

    Args:
        content: torch.Tensor
            - Feature maps of shape [N, C_in, H, W].
        style: torch.Tensor
            - Per-sample channel scales of shape [N, C_in].
        weight: torch.Tensor
            - Shared kernel of shape [C_out, C_in, k, k] with odd k.
        demodulate: bool
            - Normalize each modulated filter to unit norm.
    """
    if content.dim() != 4 or weight.dim() != 4:
        raise ShapeError("modulated_conv expects [N,C,H,W] content and a [O,C,k,k] weight")
    n, in_channels, height, width = content.shape
    out_channels, weight_in, kernel, _ = weight.shape
    if weight_in != in_channels:
        raise ShapeError(
            f"Content has {in_channels} channels but the weight expects {weight_in}"
        )
    if style.shape != (n, in_channels):
        raise ShapeError(
            f"Style must have shape {(n, in_channels)}, got {tuple(style.shape)}"
        )

    modulated = weight.unsqueeze(0) * style.reshape(n, 1, in_channels, 1, 1)
    if demodulate:
        norm = torch.rsqrt(modulated.pow(2).sum(dim=(2, 3, 4), keepdim=True) + DEMODULATION_EPS)
        modulated = modulated * norm

    out = F.conv2d(
        content.reshape(1, n * in_channels, height, width),
        modulated.reshape(n * out_channels, in_channels, kernel, kernel),
        padding=kernel // 2,
        groups=n,
    )
    return out.reshape(n, out_channels, height, width)


class MCBlock(pyro.nn.PyroModule):
    """
    Modulated-convolution block. A learned affine turns the style vector into one
    scale per input channel; the result is never a spatial map.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        style_dim: int,
        kernel_size: int = 3,
        demodulate: bool = True,
        activate: bool = True,
    ):
        super().__init__()
        self.demodulate = demodulate
        self.activate = activate
        self.affine = Affine(style_dim, in_channels, bias_init=1.0)
        self.weight = torch.nn.Parameter(
            torch.randn(out_channels, in_channels, kernel_size, kernel_size)
            / math.sqrt(in_channels * kernel_size * kernel_size)
        )
        self.bias = torch.nn.Parameter(torch.zeros(out_channels))

    def forward(self, x: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
        style = self.affine(w)
        out = modulated_conv(x, style, self.weight, self.demodulate)
        out = out + self.bias.reshape(1, -1, 1, 1)
        return leaky_relu(out) if self.activate else out
