"""
Training configuration and its line-oriented file format.

One `key = value` per line; blank lines and everything after `#` are ignored.
Unknown keys are rejected. Booleans are written `true` / `false`.

Optimization
    seed, max_steps, batch_size, crop_size, learning_rate, beta1, beta2,
    plateau_patience (evaluations without improvement before the LR is halved),
    plateau_threshold (relative improvement that counts), eval_every,
    checkpoint_every, validation_batches, num_workers, prefetch_depth
Networks
    degnet_base_channels, degnet_stages, paired, synnet_mapping_depth,
    synnet_mcblocks, synnet_channels, disc_base_channels, disc_stages,
    extractor_seed, vgg_weights (path to torchvision VGG-19 weights, empty for the
    random pyramid)
Losses
    lambda_disen, lambda_mse, lambda_real, lambda_cons, style_weight,
    feature_weight, contrast_lambda, contrast_eps, theta_decay
Degradation sampler
    blur_probability, resample_probability, noise_probability, jpeg_probability,
    sampler_passes
Data
    face_pairs_dir (folder with lq/ and hq/, empty for procedural faces degraded by the
    held-out family), natural_dir (folder of PNGs, empty for procedural textures),
    train_faces, train_naturals, val_images, image_size_min, image_size_max,
    output_dir
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Dict

from pydegrade.degradation.sampler import SamplerConfig
from pydegrade.losses import LossWeights
from pydegrade.models.discriminator import DiscriminatorConfig
from pydegrade.models.encoder import DegNetConfig
from pydegrade.models.synthesizer import SynNetConfig


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    max_steps: int = 50000
    batch_size: int = 8
    crop_size: int = 128
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    plateau_patience: int = 5
    plateau_threshold: float = 0.01
    eval_every: int = 500
    checkpoint_every: int = 5000
    validation_batches: int = 4
    num_workers: int = 2
    prefetch_depth: int = 4

    degnet_base_channels: int = 64
    degnet_stages: int = 6
    paired: bool = True
    synnet_mapping_depth: int = 4
    synnet_mcblocks: int = 6
    synnet_channels: int = 64
    disc_base_channels: int = 64
    disc_stages: int = 4
    extractor_seed: int = 0
    vgg_weights: str = ""

    lambda_disen: float = 5.0
    lambda_mse: float = 1.0
    lambda_real: float = 0.1
    lambda_cons: float = 2.0
    style_weight: float = 0.1
    feature_weight: float = 0.1
    contrast_lambda: float = 1.0
    contrast_eps: float = 0.01
    theta_decay: float = 1.0

    blur_probability: float = 1.0
    resample_probability: float = 1.0
    noise_probability: float = 1.0
    jpeg_probability: float = 1.0
    sampler_passes: int = 1

    face_pairs_dir: str = ""
    natural_dir: str = ""
    train_faces: int = 10000
    train_naturals: int = 10000
    val_images: int = 1000
    image_size_min: int = 64
    image_size_max: int = 128
    output_dir: str = "runs/default"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")
        if self.max_steps < 0:
            raise ValueError("max_steps must be a non-negative integer")
        for name in ("eval_every", "checkpoint_every", "plateau_patience", "validation_batches"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not 0 < self.image_size_min <= self.image_size_max:
            raise ValueError("image sizes must satisfy 0 < image_size_min <= image_size_max")
        # The nested configs validate their own fields.
        self.degnet_config()
        self.synnet_config()
        self.discriminator_config()
        self.loss_weights()
        self.sampler_config()

    def degnet_config(self) -> DegNetConfig:
        return DegNetConfig(
            base_channels=self.degnet_base_channels,
            num_stages=self.degnet_stages,
            resolution=self.crop_size,
            paired=self.paired,
        )

    def synnet_config(self) -> SynNetConfig:
        return SynNetConfig(
            mapping_depth=self.synnet_mapping_depth,
            num_mcblocks=self.synnet_mcblocks,
            content_channels=self.synnet_channels,
        )

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(
            base_channels=self.disc_base_channels, num_stages=self.disc_stages
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            **{f.name: getattr(self, f.name) for f in dataclasses.fields(LossWeights)}
        )

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            blur_probability=self.blur_probability,
            resample_probability=self.resample_probability,
            noise_probability=self.noise_probability,
            jpeg_probability=self.jpeg_probability,
            passes=self.sampler_passes,
        )


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"Expected a boolean, got '{text}'")


_COERCE = {"int": int, "float": float, "str": str, "bool": _parse_bool}


def parse_config(text: str) -> TrainConfig:
    types = {f.name: str(f.type) for f in dataclasses.fields(TrainConfig)}
    values: Dict[str, Any] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = (part.strip() for part in line.partition("="))
        if not sep:
            raise ValueError(f"line {n}: expected 'key = value', got '{line}'")
        if key not in types:
            raise ValueError(f"line {n}: unknown config key '{key}'")
        if key in values:
            raise ValueError(f"line {n}: duplicate config key '{key}'")
        try:
            values[key] = _COERCE[types[key]](raw)
        except ValueError as e:
            raise ValueError(f"line {n}: bad value for '{key}': {e}") from e
    return TrainConfig(**values)


def load_config(path: str) -> TrainConfig:
    with open(path) as f:
        return parse_config(f.read())


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def dump_config(config: TrainConfig) -> str:
    return "".join(
        f"{f.name} = {_format(getattr(config, f.name))}\n" for f in dataclasses.fields(config)
    )
