"""
Gram matrices and the pluggable perceptual feature extractor.

Every extractor maps an image batch [N,3,H,W] to four feature maps at strides
1, 2, 4 and 8. The default is a frozen, seed-fixed random convolutional pyramid;
`vgg19_extractor` fills the same slot with pretrained VGG-19 weights.
"""
from __future__ import annotations

import math
import os
from typing import List, Protocol, Sequence

import pyro
import torch

from pydegrade.errors import ShapeError
from pydegrade.nn.layers import conv2d, leaky_relu

# Outputs of these VGG-19 `features` indices are relu1_1, relu2_1, relu3_1, relu4_1.
VGG19_TAPS = (1, 6, 11, 20)
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class FeatureExtractor(Protocol):
    def __call__(self, images: torch.Tensor) -> List[torch.Tensor]:
        ...


def gram_matrix(features: torch.Tensor) -> torch.Tensor:
    """Per-sample [C, C] Gram matrix F F^T / (C H W) of [N, C, H, W] features."""
    if features.dim() != 4:
        raise ShapeError(f"gram_matrix expects [N,C,H,W] features, got {tuple(features.shape)}")
    n, c, h, w = features.shape
    flat = features.reshape(n, c, h * w)
    return flat @ flat.transpose(1, 2) / (c * h * w)


class RandomPyramidExtractor(pyro.nn.PyroModule):
    """Frozen random 4-stage conv pyramid; weights depend only on `seed`."""

    def __init__(self, channels: Sequence[int] = (16, 32, 64, 64), seed: int = 0):
        super().__init__()
        if len(channels) != 4:
            raise ValueError("RandomPyramidExtractor needs exactly four stage widths")
        generator = torch.Generator().manual_seed(seed)
        in_channels = 3
        for i, out_channels in enumerate(channels):
            fan_in = in_channels * 9
            weight = torch.randn(out_channels, in_channels, 3, 3, generator=generator)
            self.register_buffer(f"weight_{i}", weight * math.sqrt(2.0 / fan_in))
            in_channels = out_channels
        self.strides = (1, 2, 2, 2)

    def forward(self, images: torch.Tensor) -> List[torch.Tensor]:
        features = []
        x = images
        for i, stride in enumerate(self.strides):
            weight = getattr(self, f"weight_{i}").to(x.dtype)
            x = leaky_relu(conv2d(x, weight, stride=stride, padding=1))
            features.append(x)
        return features


class VGGExtractor(pyro.nn.PyroModule):
    def __init__(self, vgg_features: torch.nn.Module):
        super().__init__()
        self.layers = vgg_features[: VGG19_TAPS[-1] + 1]
        for p in self.layers.parameters():
            p.requires_grad_(False)
        self.register_buffer("mean", torch.tensor(IMAGENET_MEAN).reshape(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(IMAGENET_STD).reshape(1, 3, 1, 1))
        self.eval()

    def forward(self, images: torch.Tensor) -> List[torch.Tensor]:
        x = (images - self.mean.to(images.dtype)) / self.std.to(images.dtype)
        features = []
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i in VGG19_TAPS:
                features.append(x)
        return features


def vgg19_extractor(weights_path: str) -> VGGExtractor:
    """
    Build the perceptual extractor from torchvision's VGG-19 with weights loaded from
    `weights_path` (a torchvision state dict). Requires the `vgg` extra.
    """
    if not os.path.exists(weights_path):
        raise FileNotFoundError(weights_path)
    try:
        import torchvision
    except ImportError as e:
        raise ImportError(
            "vgg19_extractor requires torchvision; install pydegrade[vgg]"
        ) from e
    model = torchvision.models.vgg19(weights=None)
    model.load_state_dict(torch.load(weights_path, map_location="cpu"))
    return VGGExtractor(model.features)


def perceptual_features(
    images: torch.Tensor, extractor: FeatureExtractor
) -> List[torch.Tensor]:
    """
    Feature maps of `images` under a frozen `extractor`. Gradients reach `images`
    but never the extractor.
    """
    if images.dim() != 4:
        raise ShapeError(f"Expected an image batch [N,C,H,W], got {tuple(images.shape)}")
    return list(extractor(images))


def default_extractor(seed: int = 0) -> RandomPyramidExtractor:
    return RandomPyramidExtractor(seed=seed)
