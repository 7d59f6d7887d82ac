"""
Training data: procedural face-like and texture images, paired LQ/HQ folders and the
construction of joint-training batches.

A training batch item holds three pairs built from one face and one natural image:

- the face pseudo-HQ crop and its real LQ counterpart,
- the face crop degraded by a sampled recipe,
- the natural crop degraded by the SAME recipe.
"""
from __future__ import annotations

import concurrent.futures
import glob
import os
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import torch

from pydegrade.degradation.recipe import apply_recipe, serialize_recipe
from pydegrade.degradation.sampler import (
    HELD_OUT_REAL_CONFIG,
    SamplerConfig,
    sample_recipe,
)
from pydegrade.imaging.filters import apply_augmentation, random_augmentation, resize
from pydegrade.imaging.tensor import ImageTensor, load_image, stack_images

Pair = Tuple[ImageTensor, ImageTensor]

LQ_DIR = "lq"
HQ_DIR = "hq"


def derive_seed(*keys: int) -> int:
    """A 32-bit seed that depends only on `keys`."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def to_rgb(img: ImageTensor) -> ImageTensor:
    return img if img.channels == 3 else ImageTensor(img.data.expand(3, -1, -1))


def _grid(size: int):
    coords = (np.arange(size) + 0.5) / size
    return np.meshgrid(coords, coords, indexing="ij")


def procedural_face(size: int, seed: int) -> ImageTensor:
    """A face-like composition: skin-toned ellipse with eyes, nose and mouth on a
    smooth background."""
    rng = np.random.default_rng(seed)
    y, x = _grid(size)
    top, bottom = rng.uniform(0.2, 0.9, size=(2, 3))
    image = top * (1 - y[..., None]) + bottom * y[..., None]

    cy, cx = rng.uniform(0.45, 0.55, size=2)
    ry, rx = rng.uniform(0.32, 0.42), rng.uniform(0.25, 0.34)
    skin = np.array([rng.uniform(0.55, 0.95), rng.uniform(0.4, 0.75), rng.uniform(0.3, 0.6)])
    head = ((y - cy) / ry) ** 2 + ((x - cx) / rx) ** 2 <= 1.0
    shade = 1.0 - 0.25 * np.clip(((y - cy) / ry) ** 2 + ((x - cx) / rx) ** 2, 0, 1)
    image[head] = skin * shade[head, None]

    eye_y = cy - 0.3 * ry
    eye_dx = rng.uniform(0.35, 0.5) * rx
    eye_r = rng.uniform(0.05, 0.08)
    iris = rng.uniform(0.0, 0.4, size=3)
    for side in (-1, 1):
        eye = ((y - eye_y) / (0.6 * eye_r)) ** 2 + ((x - cx - side * eye_dx) / eye_r) ** 2 <= 1.0
        image[eye] = 0.95
        pupil = (y - eye_y) ** 2 + (x - cx - side * eye_dx) ** 2 <= (0.45 * eye_r) ** 2
        image[pupil] = iris

    nose = (np.abs(x - cx) < 0.015) & (y > cy - 0.1 * ry) & (y < cy + 0.25 * ry)
    image[nose] = skin * 0.7
    mouth_y = cy + rng.uniform(0.45, 0.6) * ry
    mouth = (np.abs(y - mouth_y - 2.0 * (x - cx) ** 2) < 0.012) & (np.abs(x - cx) < 0.4 * rx)
    image[mouth] = np.array([0.6, 0.15, 0.15])
    return ImageTensor.from_hwc(np.clip(image, 0.0, 1.0))


def procedural_texture(size: int, seed: int) -> ImageTensor:
    """A natural-image stand-in: colored sinusoid mixtures with a few hard-edged shapes."""
    rng = np.random.default_rng(seed)
    y, x = _grid(size)
    image = np.zeros((size, size, 3))
    for _ in range(int(rng.integers(3, 7))):
        freq = rng.uniform(1.0, 12.0)
        theta = rng.uniform(0, np.pi)
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(2 * np.pi * freq * (x * np.cos(theta) + y * np.sin(theta)) + phase)
        image += rng.uniform(0.05, 0.25, size=3) * wave[..., None]
    image += rng.uniform(0.3, 0.7, size=3)
    for _ in range(int(rng.integers(2, 6))):
        y0, x0 = rng.uniform(0, 0.8, size=2)
        h, w = rng.uniform(0.05, 0.3, size=2)
        box = (y >= y0) & (y < y0 + h) & (x >= x0) & (x < x0 + w)
        image[box] = rng.uniform(0, 1, size=3)
    return ImageTensor.from_hwc(np.clip(image, 0.0, 1.0))


PROCEDURAL_GENERATORS: Mapping[str, Callable[[int, int], ImageTensor]] = {
    "face": procedural_face,
    "texture": procedural_texture,
}


def procedural_images(
    kind: str, count: int, seed: int, size_range: Tuple[int, int] = (64, 128)
) -> List[ImageTensor]:
    """`count` procedural images with square sizes drawn from `size_range`."""
    if kind not in PROCEDURAL_GENERATORS:
        raise NotImplementedError(
            f"Unknown procedural image kind '{kind}'. "
            f"Available kinds are {list(PROCEDURAL_GENERATORS)}"
        )
    rng = np.random.default_rng(seed)
    sizes = rng.integers(size_range[0], size_range[1] + 1, size=count)
    return [
        PROCEDURAL_GENERATORS[kind](int(s), derive_seed(seed, i)) for i, s in enumerate(sizes)
    ]


def held_out_real_pairs(faces: Sequence[ImageTensor], seed: int) -> List[Pair]:
    """(LQ, pseudo-HQ) face pairs whose degradation comes from the held-out recipe family."""
    return [
        (apply_recipe(face, sample_recipe(HELD_OUT_REAL_CONFIG, derive_seed(seed, i))), face)
        for i, face in enumerate(faces)
    ]


def load_image_dir(path: str) -> List[ImageTensor]:
    if not os.path.isdir(path):
        raise FileNotFoundError(path)
    files = sorted(glob.glob(os.path.join(path, "*.png")))
    return [to_rgb(load_image(f)) for f in files]


def load_pair_dir(path: str) -> List[Tuple[ImageTensor, ImageTensor, str]]:
    """
    Read aligned pairs from `path/lq/*.png` and `path/hq/*.png`, matched by file name.
    LQ images smaller than their HQ counterpart are kept at their own size.
    """
    lq_dir, hq_dir = os.path.join(path, LQ_DIR), os.path.join(path, HQ_DIR)
    for d in (lq_dir, hq_dir):
        if not os.path.isdir(d):
            raise FileNotFoundError(d)
    names = sorted(os.path.basename(f) for f in glob.glob(os.path.join(hq_dir, "*.png")))
    pairs = []
    for name in names:
        lq_path = os.path.join(lq_dir, name)
        if not os.path.exists(lq_path):
            raise ValueError(f"HQ image {name} has no LQ counterpart in {lq_dir}")
        pairs.append(
            (to_rgb(load_image(lq_path)), to_rgb(load_image(os.path.join(hq_dir, name))), name)
        )
    return pairs


def align_pair(lq: ImageTensor, hq: ImageTensor) -> Pair:
    if (lq.height, lq.width) != (hq.height, hq.width):
        lq = resize(lq, hq.height, hq.width, "bicubic")
    return lq, hq


@dataclass
class TrainingBatch:
    face_hq: torch.Tensor
    face_real_lq: torch.Tensor
    face_syn_lq: torch.Tensor
    natural_hq: torch.Tensor
    natural_syn_lq: torch.Tensor
    recipes: List[str]

    @property
    def size(self) -> int:
        return self.face_hq.shape[0]

    def provenance(self) -> List[str]:
        return list(self.recipes)


def make_training_batch(
    face_pairs: Sequence[Pair],
    natural_hq_set: Sequence[ImageTensor],
    sampler: SamplerConfig,
    seed: int,
    *,
    batch_size: int = 1,
    crop_size: int = 128,
) -> TrainingBatch:
    """
    Build one joint-training batch; the result depends only on the arguments.

    Args:
        face_pairs: Sequence[Tuple[ImageTensor, ImageTensor]]
            - (real LQ, pseudo-HQ) face pairs.
        natural_hq_set: Sequence[ImageTensor]
            - Clean natural images.
        sampler: SamplerConfig
            - Recipe distribution shared by the face and natural synthetic pairs.
        seed: int
            - Batch seed.
        batch_size: int
            - Number of items.
        crop_size: int
            - Side of the square training crops.
    """
    if not face_pairs or not natural_hq_set:
        raise ValueError("make_training_batch needs non-empty face and natural datasets")
    if batch_size < 1:
        raise ValueError("batch_size must be a positive integer")

    items = {name: [] for name in ("face_hq", "face_real_lq", "face_syn_lq", "natural_hq", "natural_syn_lq")}
    recipes = []
    for i in range(batch_size):
        rng = np.random.default_rng(derive_seed(seed, i))
        real_lq, face_hq = align_pair(*face_pairs[int(rng.integers(len(face_pairs)))])
        natural = natural_hq_set[int(rng.integers(len(natural_hq_set)))]

        face_aug = random_augmentation(face_hq.height, face_hq.width, crop_size, rng)
        natural_aug = random_augmentation(natural.height, natural.width, crop_size, rng)
        face_crop = apply_augmentation(face_hq, face_aug).clip()
        real_crop = apply_augmentation(real_lq, face_aug).clip()
        natural_crop = apply_augmentation(natural, natural_aug).clip()

        recipe = sample_recipe(sampler, int(rng.integers(2**31 - 1)))
        recipes.append(serialize_recipe(recipe))

        items["face_hq"].append(face_crop)
        items["face_real_lq"].append(real_crop)
        items["face_syn_lq"].append(apply_recipe(face_crop, recipe))
        items["natural_hq"].append(natural_crop)
        items["natural_syn_lq"].append(apply_recipe(natural_crop, recipe))

    return TrainingBatch(**{k: stack_images(v) for k, v in items.items()}, recipes=recipes)


def prefetch(
    make_batch: Callable[[int], TrainingBatch],
    keys: Iterable[int],
    *,
    workers: int = 2,
    depth: int = 4,
) -> Iterator[TrainingBatch]:
    """
    Yield `make_batch(key)` for every key, in order, computing up to `depth` batches
    ahead on a thread pool.
    """
    if workers < 1 or depth < 1:
        raise ValueError("workers and depth must be positive integers")
    keys = iter(keys)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        pending: deque = deque()
        for key in keys:
            pending.append(pool.submit(make_batch, key))
            if len(pending) >= depth:
                break
        while pending:
            batch = pending.popleft().result()
            next_key: Optional[int] = next(keys, None)
            if next_key is not None:
                pending.append(pool.submit(make_batch, next_key))
            yield batch
