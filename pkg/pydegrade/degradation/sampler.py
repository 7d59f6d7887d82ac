"""Random draws of degradation recipes in shuffled order."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from pydegrade.degradation.ops import (
    SHUFFLED_KINDS,
    BlurOp,
    ClipOp,
    DegradationOp,
    JpegOp,
    NoiseOp,
    ResampleDownUpOp,
)
from pydegrade.degradation.recipe import DegradationRecipe
from pydegrade.imaging.filters import RESAMPLE_METHODS

Range = Tuple[float, float]

# Upper bound of the per-op seeds handed to the noise op.
_MAX_OP_SEED = 2**31 - 1


@dataclass(frozen=True)
class SamplerConfig:
    """
    Inclusion probabilities and parameter ranges of the shuffled classical degradation
    model. Ranges are closed intervals; `passes` > 1 repeats the shuffled sequence.
    """

    blur_probability: float = 1.0
    resample_probability: float = 1.0
    noise_probability: float = 1.0
    jpeg_probability: float = 1.0
    blur_sigma: Range = (0.2, 3.0)
    scale: Range = (0.25, 1.0)
    noise_sigma: Range = (0.0, 0.1)
    jpeg_quality: Tuple[int, int] = (30, 95)
    resample_methods: Tuple[str, ...] = ("bicubic",)
    gray_noise_probability: float = 0.5
    passes: int = 1

    def __post_init__(self):
        for name in (
            "blur_probability",
            "resample_probability",
            "noise_probability",
            "jpeg_probability",
            "gray_noise_probability",
        ):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")

        for name in ("blur_sigma", "scale", "noise_sigma", "jpeg_quality"):
            low, high = getattr(self, name)
            if low > high:
                raise ValueError(f"{name} range is empty: ({low}, {high})")

        if self.blur_sigma[0] <= 0:
            raise ValueError("blur_sigma must be positive")
        if not (0 < self.scale[0] and self.scale[1] <= 1.0):
            raise ValueError("scale must lie in (0, 1]")
        if self.noise_sigma[0] < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not (1 <= self.jpeg_quality[0] and self.jpeg_quality[1] <= 100):
            raise ValueError("jpeg_quality must lie in [1, 100]")
        if not self.resample_methods or any(
            m not in RESAMPLE_METHODS for m in self.resample_methods
        ):
            raise ValueError(
                f"resample_methods must be a non-empty subset of {RESAMPLE_METHODS}"
            )
        if self.passes < 1:
            raise ValueError("passes must be a positive integer")

    @property
    def probabilities(self) -> Dict[str, float]:
        return {
            "blur": self.blur_probability,
            "resample_down_up": self.resample_probability,
            "noise": self.noise_probability,
            "jpeg": self.jpeg_probability,
        }


def single_op_config(kind: str, base: SamplerConfig = SamplerConfig()) -> SamplerConfig:
    """Restrict `base` to one op kind, always included. Used for the four single-op families."""
    if kind not in SHUFFLED_KINDS:
        raise NotImplementedError(
            f"Unknown degradation kind '{kind}'. Available kinds are {SHUFFLED_KINDS}"
        )
    probabilities = {
        "blur_probability": 0.0,
        "resample_probability": 0.0,
        "noise_probability": 0.0,
        "jpeg_probability": 0.0,
    }
    probabilities[
        {
            "blur": "blur_probability",
            "resample_down_up": "resample_probability",
            "noise": "noise_probability",
            "jpeg": "jpeg_probability",
        }[kind]
    ] = 1.0
    return dataclasses.replace(base, **probabilities)


# Stand-in for real-world degradation: every parameter lies outside the training ranges.
HELD_OUT_REAL_CONFIG = SamplerConfig(
    blur_sigma=(3.2, 4.0),
    scale=(0.15, 0.24),
    noise_sigma=(0.11, 0.15),
    jpeg_quality=(10, 25),
)

IDENTITY_CONFIG = SamplerConfig(
    blur_probability=0.0,
    resample_probability=0.0,
    noise_probability=0.0,
    jpeg_probability=0.0,
)


def _draw_op(kind: str, config: SamplerConfig, rng: np.random.Generator) -> DegradationOp:
    if kind == "blur":
        sigma_x, sigma_y = rng.uniform(*config.blur_sigma, size=2)
        angle = rng.uniform(0.0, np.pi)
        return BlurOp(float(sigma_x), float(sigma_y), float(angle))
    if kind == "resample_down_up":
        method = config.resample_methods[rng.integers(len(config.resample_methods))]
        return ResampleDownUpOp(float(rng.uniform(*config.scale)), str(method))
    if kind == "noise":
        sigma = float(rng.uniform(*config.noise_sigma))
        mode = "gray" if rng.random() < config.gray_noise_probability else "color"
        return NoiseOp(sigma, mode, int(rng.integers(_MAX_OP_SEED)))
    if kind == "jpeg":
        low, high = config.jpeg_quality
        return JpegOp(int(rng.integers(low, high + 1)))
    raise NotImplementedError(f"Unknown degradation kind '{kind}'")


def sample_recipe(config: SamplerConfig, seed: int) -> DegradationRecipe:
    """
    Draw a recipe from `config`. The result depends only on (config, seed).

    Args:
        config: SamplerConfig
            - Inclusion probabilities and parameter ranges.
        seed: int
            - Master seed, stored in the recipe.
    """
    rng = np.random.default_rng(seed)
    ops: List[DegradationOp] = []
    for _ in range(config.passes):
        included = [
            kind for kind in SHUFFLED_KINDS if rng.random() < config.probabilities[kind]
        ]
        order = [included[i] for i in rng.permutation(len(included))]
        ops.extend(_draw_op(kind, config, rng) for kind in order)
    ops.append(ClipOp())
    return DegradationRecipe(tuple(ops), master_seed=int(seed), passes=config.passes)
