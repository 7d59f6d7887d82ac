"""Quantitative checks of a trained model and of exported pairs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import torch
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import confusion_matrix, silhouette_score
from sklearn.model_selection import train_test_split
from sklearn.neighbors import NearestNeighbors

from pydegrade.degradation.ops import SHUFFLED_KINDS
from pydegrade.degradation.recipe import DegradationRecipe, apply_recipe
from pydegrade.degradation.sampler import (
    HELD_OUT_REAL_CONFIG,
    SamplerConfig,
    sample_recipe,
    single_op_config,
)
from pydegrade.imaging.filters import apply_augmentation, random_augmentation
from pydegrade.imaging.metrics import compile_metric, psnr
from pydegrade.imaging.tensor import ImageTensor
from pydegrade.models.encoder import DegradationEncoder, extract_representation
from pydegrade.models.synthesizer import SynthesisNetwork, synthesize
from pydegrade.training.data import align_pair, derive_seed, load_pair_dir
from pydegrade.training.pool import PoolItem, RepresentationPool


@dataclass
class ClusterReport:
    accuracy: float
    silhouette: float
    confusion: pd.DataFrame


def cluster_report(
    pool: RepresentationPool, *, test_fraction: float = 0.2, seed: int = 0
) -> ClusterReport:
    """
    How well a labelled pool separates its degradation families: held-out accuracy of
    a multinomial linear classifier, silhouette score of the raw representations, and the
    classifier's confusion table (rows are true labels).
    """
    if any(label is None for label in pool.labels):
        raise ValueError("cluster_report needs a label on every pool entry")
    labels = np.array(pool.labels)
    classes = sorted(set(pool.labels))
    if len(classes) < 2:
        raise ValueError("cluster_report needs at least two distinct labels")

    x = pool.omegas.double().numpy()
    x_train, x_test, y_train, y_test = train_test_split(
        x, labels, test_size=test_fraction, random_state=seed, stratify=labels
    )
    classifier = LogisticRegression(max_iter=2000, random_state=seed)
    classifier.fit(x_train, y_train)
    predicted = classifier.predict(x_test)

    return ClusterReport(
        accuracy=float(np.mean(predicted == y_test)),
        silhouette=float(silhouette_score(x, labels)),
        confusion=pd.DataFrame(
            confusion_matrix(y_test, predicted, labels=classes), index=classes, columns=classes
        ),
    )


def family_samplers(include_real: bool = True) -> Mapping[str, SamplerConfig]:
    """The four single-op families, plus the held-out family standing in for real data."""
    families = {kind: single_op_config(kind) for kind in SHUFFLED_KINDS}
    if include_real:
        families["real"] = HELD_OUT_REAL_CONFIG
    return families


def labelled_family_pairs(
    images: Sequence[ImageTensor],
    per_family: int,
    seed: int,
    families: Optional[Mapping[str, SamplerConfig]] = None,
    crop_size: int = 64,
) -> List[PoolItem]:
    """(LQ, HQ, family) items: `per_family` random crops degraded by each family."""
    families = family_samplers() if families is None else families
    items: List[PoolItem] = []
    for f, (label, sampler) in enumerate(families.items()):
        for i in range(per_family):
            rng = np.random.default_rng(derive_seed(seed, f, i))
            img = images[int(rng.integers(len(images)))]
            crop = apply_augmentation(img, random_augmentation(img.height, img.width, crop_size, rng)).clip()
            recipe = sample_recipe(sampler, int(rng.integers(2**31 - 1)))
            items.append((apply_recipe(crop, recipe), crop, label))
    return items


@dataclass(frozen=True)
class SharedRecipeItem:
    face_hq: ImageTensor
    face_lq: ImageTensor
    natural_hq: ImageTensor
    natural_lq: ImageTensor
    recipe: DegradationRecipe


def shared_recipe_items(
    faces: Sequence[ImageTensor],
    naturals: Sequence[ImageTensor],
    sampler: SamplerConfig,
    count: int,
    seed: int,
    crop_size: int = 64,
) -> List[SharedRecipeItem]:
    items = []
    for k in range(count):
        rng = np.random.default_rng(derive_seed(seed, k))
        face = faces[int(rng.integers(len(faces)))]
        natural = naturals[int(rng.integers(len(naturals)))]
        face = apply_augmentation(face, random_augmentation(face.height, face.width, crop_size, rng)).clip()
        natural = apply_augmentation(
            natural, random_augmentation(natural.height, natural.width, crop_size, rng)
        ).clip()
        recipe = sample_recipe(sampler, int(rng.integers(2**31 - 1)))
        items.append(
            SharedRecipeItem(face, apply_recipe(face, recipe), natural, apply_recipe(natural, recipe), recipe)
        )
    return items


def _mse(a: ImageTensor, b: ImageTensor) -> float:
    return float(torch.mean((a.data - b.data) ** 2))


@dataclass
class ConsistencyReport:
    table: pd.DataFrame
    swap_ratio: float
    fidelity_gain_db: float


def consistency_report(
    items: Sequence[SharedRecipeItem],
    encoder: DegradationEncoder,
    synnet: SynthesisNetwork,
) -> ConsistencyReport:
    """
    Per item: the error of degrading the natural image with the face representation
    (swap) against using its own representation, and the PSNR of the synthesized LQ
    against the do-nothing baseline. `swap_ratio` is mean swap MSE over mean own MSE.
    """
    if not items:
        raise ValueError("consistency_report needs at least one item")
    rows = []
    for item in items:
        omega_face = extract_representation(item.face_lq, item.face_hq, encoder)
        omega_natural = extract_representation(item.natural_lq, item.natural_hq, encoder)
        swapped = synthesize(item.natural_hq, omega_face, synnet)
        own = synthesize(item.natural_hq, omega_natural, synnet)
        rows.append(
            {
                "swap_mse": _mse(swapped, item.natural_lq),
                "own_mse": _mse(own, item.natural_lq),
                "synth_psnr": psnr(own, item.natural_lq),
                "baseline_psnr": psnr(item.natural_hq, item.natural_lq),
            }
        )
    table = pd.DataFrame(rows)
    own_mean = table["own_mse"].mean()
    return ConsistencyReport(
        table=table,
        swap_ratio=float(table["swap_mse"].mean() / own_mean) if own_mean > 0 else float("inf"),
        fidelity_gain_db=float((table["synth_psnr"] - table["baseline_psnr"]).mean()),
    )


def degradation_space_distance(
    reference_pool: RepresentationPool, candidate_pool: RepresentationPool
) -> float:
    """Mean Euclidean distance from each candidate representation to its nearest reference."""
    if len(reference_pool) == 0 or len(candidate_pool) == 0:
        raise ValueError("degradation_space_distance needs two non-empty pools")
    neighbours = NearestNeighbors(n_neighbors=1).fit(reference_pool.omegas.double().numpy())
    distances, _ = neighbours.kneighbors(candidate_pool.omegas.double().numpy())
    return float(distances.mean())


def evaluate_pairs(pairs_dir: str, metrics: Sequence[str] = ("psnr", "ssim")) -> pd.DataFrame:
    """
    One row per pair of `pairs_dir/lq` and `pairs_dir/hq` with the requested metrics.
    LQ images smaller than their HQ counterpart are bicubically resized first.
    """
    compiled = {name: compile_metric(name) for name in metrics}
    rows = []
    for lq, hq, name in load_pair_dir(pairs_dir):
        lq, hq = align_pair(lq, hq)
        rows.append({"name": name, **{m: float(f(lq.clip(), hq)) for m, f in compiled.items()}})
    return pd.DataFrame(rows, columns=["name", *metrics])
