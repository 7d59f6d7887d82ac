import os
from typing import List

import numpy as np
import pyro
import torch

from pydegrade.config import TrainConfig
from pydegrade.imaging.tensor import ImageTensor
from pydegrade.training.loop import Networks, build_networks

DATA_PATH = os.path.join(os.path.dirname(__file__), "data")
GOLDEN_RECIPE_PATH = os.path.join(DATA_PATH, "golden_recipe.txt")

SEEDS = [0, 1, 7, 1234]
IMAGE_SHAPES = [(3, 16, 16), (3, 17, 23), (1, 12, 9)]
RGB_SIZES = [32, 48, 64]
RESAMPLE_METHODS = ["nearest", "bilinear", "bicubic"]
NON_POS_INTS = [
    3.5,
    -3,
    0,
]  # bad candidates for counts and step numbers

# Finite-difference tolerances used by every gradient check.
GRADCHECK_KWARGS = {"eps": 1e-5, "atol": 1e-6, "rtol": 1e-4}
# Image batches every differentiable op is checked on.
GRADCHECK_SHAPES = [(1, 3, 8, 8), (2, 3, 8, 8), (1, 3, 12, 10), (2, 3, 9, 11), (1, 3, 16, 8)]

TINY_TRAIN_CONFIG = TrainConfig(
    seed=0,
    max_steps=2,
    batch_size=2,
    crop_size=32,
    eval_every=1,
    checkpoint_every=1,
    validation_batches=1,
    num_workers=1,
    prefetch_depth=2,
    degnet_base_channels=4,
    degnet_stages=2,
    synnet_mapping_depth=1,
    synnet_mcblocks=3,
    synnet_channels=4,
    disc_base_channels=4,
    disc_stages=1,
    theta_decay=0.0,
    train_faces=4,
    train_naturals=4,
    val_images=2,
    image_size_min=32,
    image_size_max=40,
)


def random_image(seed: int, channels: int = 3, height: int = 16, width: int = 16) -> ImageTensor:
    rng = np.random.default_rng(seed)
    return ImageTensor(torch.from_numpy(rng.uniform(0.0, 1.0, size=(channels, height, width))))


def random_images(count: int, seed: int, size: int = 32) -> List[ImageTensor]:
    return [random_image(seed * 1000 + i, 3, size, size) for i in range(count)]


def tiny_networks(seed: int = 0, config: TrainConfig = TINY_TRAIN_CONFIG) -> Networks:
    pyro.set_rng_seed(seed)
    return build_networks(config)


def check_images_equal(a: ImageTensor, b: ImageTensor):
    assert a.shape == b.shape, f"Shapes differ: {a.shape} vs {b.shape}"
    assert torch.equal(a.data, b.data), "Images differ in value"
    return True


def check_in_unit_range(img: ImageTensor):
    assert float(img.data.min()) >= 0.0 and float(img.data.max()) <= 1.0
    return True


def check_parameters_equal(a: torch.nn.Module, b: torch.nn.Module):
    for (name, p), (_, q) in zip(a.named_parameters(), b.named_parameters()):
        assert torch.equal(p, q), f"Parameter {name} differs"
    return True


def double_input(shape, seed: int = 0, offset: float = 0.0) -> torch.Tensor:
    """Float64 standard normal tensor (plus `offset`) that requires grad."""
    generator = torch.Generator().manual_seed(seed)
    values = torch.randn(*shape, generator=generator, dtype=torch.float64) + offset
    return values.requires_grad_(True)
