"""
Basic differentiable layers: checked convolution, spectral normalization, leaky
rectification and affine (fully-connected) maps. Every trainable block is a
`pyro.nn.PyroModule` so it composes with the rest of the package.
"""
from __future__ import annotations

import contextlib
import math
from typing import Iterator, NamedTuple, Optional

import pyro
import torch
import torch.nn.functional as F

from pydegrade.errors import ShapeError

LEAKY_SLOPE = 0.2
SIGMA_FLOOR = 1e-12
WARM_START_ITERS = 50


def leaky_relu(x: torch.Tensor) -> torch.Tensor:
    return F.leaky_relu(x, LEAKY_SLOPE)


def conv2d(
    x: torch.Tensor,
    weight: torch.Tensor,
    bias: Optional[torch.Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> torch.Tensor:
    if x.dim() != 4 or weight.dim() != 4:
        raise ShapeError(
            f"conv2d expects a [N,C,H,W] input and a [O,C,k,k] weight, got {tuple(x.shape)} "
            f"and {tuple(weight.shape)}"
        )
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(
            f"Input has {x.shape[1]} channels but the weight expects {weight.shape[1]}"
        )
    return F.conv2d(x, weight, bias, stride=stride, padding=padding)


def _start_vector(matrix: torch.Tensor) -> torch.Tensor:
    # W 1, or 1 when W 1 vanishes. Depends on W only.
    start = torch.mv(matrix, torch.ones(matrix.shape[1], dtype=matrix.dtype, device=matrix.device))
    if float(start.norm()) == 0.0:
        start = torch.ones(matrix.shape[0], dtype=matrix.dtype, device=matrix.device)
    return start


class SpectralEstimate(NamedTuple):
    weight: torch.Tensor
    sigma: torch.Tensor
    u: torch.Tensor
    v: torch.Tensor


def spectral_normalize(
    weight: torch.Tensor,
    power_iters: int = 1,
    u: Optional[torch.Tensor] = None,
    v: Optional[torch.Tensor] = None,
) -> SpectralEstimate:
    """
    Divide `weight` by a power-iteration estimate of its largest singular value.

    The weight is viewed as a [out, rest] matrix. The singular vector estimates are
    refined `power_iters` times without gradient; the gradient of the result flows
    through sigma = u^T W v with u and v held constant.

    Args:
        weight: torch.Tensor
            - Any tensor with at least 2 dimensions (or a matrix).
        power_iters: int
            - Number of power iterations; 0 reuses the given `u` and `v` as they are.
        u: Optional[torch.Tensor]
            - Persistent left singular vector estimate carried across calls. Defaults to
              the normalized W 1.
        v: Optional[torch.Tensor]
            - Persistent right singular vector estimate. Required when `power_iters` is 0.

    Returns:
        SpectralEstimate with the normalized weight, the estimate sigma (floored at
        1e-12) and the updated singular vector estimates.
    """
    if power_iters < 0:
        raise ValueError("power_iters must be a non-negative integer")
    matrix = weight.reshape(weight.shape[0], -1)

    with torch.no_grad():
        if u is None:
            u = _start_vector(matrix)
        u = F.normalize(u.to(matrix.dtype), dim=0)
        if power_iters == 0:
            if v is None:
                raise ValueError("v is required when power_iters is 0")
            v = v.to(matrix.dtype)
        for _ in range(power_iters):
            v = F.normalize(torch.mv(matrix.t(), u), dim=0)
            u = F.normalize(torch.mv(matrix, v), dim=0)

    sigma = torch.dot(u, torch.mv(matrix, v)).clamp_min(SIGMA_FLOOR)
    return SpectralEstimate(weight / sigma, sigma, u, v)


class SNConv2d(pyro.nn.PyroModule):
    """
    Convolution whose weight is spectrally normalized on every call. The power
    iteration state is refreshed only in training mode, so evaluation is a pure
    function of the stored parameters and buffers.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        stride: int = 1,
        padding: Optional[int] = None,
        power_iters: int = 1,
    ):
        super().__init__()
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        self.power_iters = power_iters

        weight = torch.empty(out_channels, in_channels, kernel_size, kernel_size)
        torch.nn.init.kaiming_uniform_(weight, a=math.sqrt(5))
        self.weight = torch.nn.Parameter(weight)
        self.bias = torch.nn.Parameter(torch.zeros(out_channels))

        # Converged singular vectors at construction; training refines them by `power_iters` per call.
        estimate = spectral_normalize(weight, power_iters=WARM_START_ITERS)
        self.register_buffer("u", estimate.u)
        self.register_buffer("v", estimate.v)

    def normalized_weight(self) -> torch.Tensor:
        if self.training:
            estimate = spectral_normalize(self.weight, self.power_iters, self.u, self.v)
            with torch.no_grad():
                self.u.copy_(estimate.u)
                self.v.copy_(estimate.v)
        else:
            estimate = spectral_normalize(self.weight, 0, self.u, self.v)
        return estimate.weight

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return conv2d(x, self.normalized_weight(), self.bias, self.stride, self.padding)


class Affine(pyro.nn.PyroModule):
    """Fully-connected map y = x W^T + b."""

    def __init__(self, in_features: int, out_features: int, bias_init: float = 0.0):
        super().__init__()
        self.weight = torch.nn.Parameter(
            torch.randn(out_features, in_features) / math.sqrt(in_features)
        )
        self.bias = torch.nn.Parameter(torch.full((out_features,), float(bias_init)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.weight.shape[1]:
            raise ShapeError(
                f"Affine expects {self.weight.shape[1]} input features, got {x.shape[-1]}"
            )
        return F.linear(x, self.weight, self.bias)


class Conv2d(pyro.nn.PyroModule):
    """Plain convolution, initialized like `SNConv2d` but without normalization."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        stride: int = 1,
        padding: Optional[int] = None,
    ):
        super().__init__()
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        weight = torch.empty(out_channels, in_channels, kernel_size, kernel_size)
        torch.nn.init.kaiming_uniform_(weight, a=math.sqrt(5))
        self.weight = torch.nn.Parameter(weight)
        self.bias = torch.nn.Parameter(torch.zeros(out_channels))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)


@contextlib.contextmanager
def evaluation(*modules: torch.nn.Module) -> Iterator[None]:
    """Put `modules` in eval mode for the duration of the block, then restore them."""
    previous = [m.training for m in modules]
    for m in modules:
        m.eval()
    try:
        yield
    finally:
        for m, mode in zip(modules, previous):
            m.train(mode)
