"""Export of degradation-transferred (LQ, HQ) training pairs for downstream restoration."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from pydegrade.imaging.filters import resize
from pydegrade.imaging.tensor import ImageTensor, load_image, save_image
from pydegrade.models.encoder import DegradationEncoder
from pydegrade.models.synthesizer import SynthesisNetwork, synthesize_natural
from pydegrade.training.data import derive_seed, load_image_dir, to_rgb
from pydegrade.training.pool import (
    RepresentationPool,
    SamplingStrategy,
    augment_pairs,
    build_pool,
    sample_pool_index,
)

SCALES = (1, 2, 4)
MANIFEST_NAME = "manifest.tsv"
MANIFEST_COLUMNS = ["index", "source", "hq_path", "lq_path", "pool_index", "seed", "scale"]


@dataclass(frozen=True)
class PairedSample:
    hq: ImageTensor
    lq: ImageTensor
    provenance: str
    scale: int = 1


def modcrop(img: ImageTensor, scale: int) -> ImageTensor:
    """Crop the bottom/right border so both sides are multiples of `scale`."""
    height, width = img.height - img.height % scale, img.width - img.width % scale
    return ImageTensor(img.data[:, :height, :width])


def degrade_for_export(
    hq: ImageTensor, omega, synnet: SynthesisNetwork, scale: int
) -> ImageTensor:
    lq = synthesize_natural(hq, omega, synnet)
    if scale > 1:
        lq = resize(lq, hq.height // scale, hq.width // scale, "bicubic").clip()
    return lq


def synthesize_pairs(
    natural_hq: Union[str, Sequence[ImageTensor]],
    pool: RepresentationPool,
    synnet: SynthesisNetwork,
    scale: int,
    count: int,
    seed: int,
    out_dir: str,
    *,
    strategy: SamplingStrategy = "uniform",
) -> Tuple[List[PairedSample], pd.DataFrame]:
    """
    Degrade clean natural images with representations drawn from `pool` and write the
    pairs as `out_dir/hq/*.png`, `out_dir/lq/*.png` plus a tab-separated manifest.

    Args:
        natural_hq: Union[str, Sequence[ImageTensor]]
            - Folder of clean PNGs, or the images themselves.
        pool: RepresentationPool
            - Source of degradation representations.
        synnet: SynthesisNetwork
            - Trained generator.
        scale: int
            - 1, 2 or 4. For scale > 1 the LQ image is bicubically downscaled so its
              sides are exactly those of the HQ image divided by `scale`.
        count: int
            - Number of pairs.
        seed: int
            - Drives the choice of image and pool entry for every pair.
        out_dir: str
            - Output folder, created when missing.
        strategy: Literal["uniform", "by_label"]
            - Pool sampling strategy.

    Returns:
        The exported samples and the manifest as a DataFrame.
    """
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}, got {scale}")
    if not (isinstance(count, int) and count > 0):
        raise ValueError("count must be a positive integer")
    if len(pool) == 0:
        raise ValueError("Cannot synthesize pairs from an empty pool")

    if isinstance(natural_hq, str):
        sources = sorted(f for f in os.listdir(natural_hq) if f.endswith(".png"))
        images = load_image_dir(natural_hq)
    else:
        images = [to_rgb(img) for img in natural_hq]
        sources = [f"image-{i}" for i in range(len(images))]
    if not images:
        raise ValueError("No natural HQ images to degrade")

    for sub in ("hq", "lq"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    samples, records = [], []
    for k in range(count):
        pair_seed = derive_seed(seed, k)
        rng = np.random.default_rng(pair_seed)
        image_index = int(rng.integers(len(images)))
        pool_index = sample_pool_index(pool, derive_seed(pair_seed, 1), strategy)

        hq_path = os.path.join("hq", f"{k:06d}.png")
        lq_path = os.path.join("lq", f"{k:06d}.png")
        save_image(modcrop(images[image_index], scale), os.path.join(out_dir, hq_path))
        # Degrade the stored 8-bit image so replays start from identical pixels.
        hq = to_rgb(load_image(os.path.join(out_dir, hq_path)))
        lq = degrade_for_export(hq, pool.omegas[pool_index], synnet, scale)
        save_image(lq, os.path.join(out_dir, lq_path))

        samples.append(PairedSample(hq, lq, f"pool:{pool_index}", scale))
        records.append([k, sources[image_index], hq_path, lq_path, pool_index, pair_seed, scale])

    manifest = pd.DataFrame(records, columns=MANIFEST_COLUMNS)
    manifest.to_csv(os.path.join(out_dir, MANIFEST_NAME), sep="\t", index=False)
    return samples, manifest


def replay_manifest(
    pairs_dir: str,
    pool: RepresentationPool,
    synnet: SynthesisNetwork,
    out_dir: Optional[str] = None,
) -> List[str]:
    """
    Regenerate every LQ image listed in `pairs_dir/manifest.tsv` from its stored HQ
    image and pool index. Outputs go to `out_dir` (default: overwrite in place);
    returns the written paths.
    """
    manifest_path = os.path.join(pairs_dir, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise FileNotFoundError(manifest_path)
    manifest = pd.read_csv(manifest_path, sep="\t")
    out_dir = pairs_dir if out_dir is None else out_dir

    written = []
    for row in manifest.itertuples(index=False):
        hq = to_rgb(load_image(os.path.join(pairs_dir, row.hq_path)))
        lq = degrade_for_export(hq, pool.omegas[int(row.pool_index)], synnet, int(row.scale))
        path = os.path.join(out_dir, row.lq_path)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        save_image(lq, path)
        written.append(path)
    return written


def specific_scenario_pairs(
    face_lq: ImageTensor,
    face_pseudo_hq: ImageTensor,
    natural_hq: Union[str, Sequence[ImageTensor]],
    encoder: DegradationEncoder,
    synnet: SynthesisNetwork,
    out_dir: str,
    *,
    copies: int = 16,
    count: int = 100,
    scale: int = 1,
    seed: int = 0,
) -> Tuple[RepresentationPool, List[PairedSample], pd.DataFrame]:
    """
    Fine-tuning data for one specific degradation: build a private pool from a single
    degraded face region and its augmentations, then export natural pairs carrying
    that degradation.
    """
    lq = face_lq
    if (lq.height, lq.width) != (face_pseudo_hq.height, face_pseudo_hq.width):
        lq = resize(lq, face_pseudo_hq.height, face_pseudo_hq.width, "bicubic").clip()
    items = augment_pairs([(to_rgb(lq), to_rgb(face_pseudo_hq), "scenario")], copies, seed)
    pool = build_pool(items, encoder, [f"scenario-{i}" for i in range(len(items))])
    samples, manifest = synthesize_pairs(natural_hq, pool, synnet, scale, count, seed, out_dir)
    return pool, samples, manifest
