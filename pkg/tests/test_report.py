import os

import numpy as np
import pytest
import torch

from pydegrade.degradation.ops import SHUFFLED_KINDS
from pydegrade.degradation.sampler import SamplerConfig
from pydegrade.imaging.tensor import save_image
from pydegrade.models.encoder import OMEGA_DIM
from pydegrade.training.data import procedural_images
from pydegrade.training.pool import RepresentationPool
from pydegrade.training.report import (
    cluster_report,
    consistency_report,
    degradation_space_distance,
    evaluate_pairs,
    family_samplers,
    labelled_family_pairs,
    shared_recipe_items,
)

from .fixtures import random_image, tiny_networks


def separated_pool(labels=("blur", "jpeg", "noise"), per_label=20, spread=0.1):
    generator = torch.Generator().manual_seed(0)
    omegas, names = [], []
    for k, label in enumerate(labels):
        centre = torch.zeros(OMEGA_DIM)
        centre[k] = 10.0
        for _ in range(per_label):
            omegas.append(centre + spread * torch.randn(OMEGA_DIM, generator=generator))
            names.append(label)
    return RepresentationPool(torch.stack(omegas), names)


def test_cluster_report_on_separated_families():
    result = cluster_report(separated_pool())
    assert result.accuracy == 1.0
    assert result.silhouette > 0.5
    assert list(result.confusion.index) == ["blur", "jpeg", "noise"]
    confusion = result.confusion.to_numpy()
    assert np.all(confusion == np.diag(np.diag(confusion)))
    assert confusion.sum() == 12


def test_cluster_report_on_mixed_families():
    pool = separated_pool(spread=0.1)
    shuffled = list(pool.labels)
    np.random.default_rng(0).shuffle(shuffled)
    result = cluster_report(RepresentationPool(pool.omegas, shuffled))
    assert result.silhouette < 0.2


def test_cluster_report_errors():
    pool = separated_pool()
    with pytest.raises(ValueError):
        cluster_report(RepresentationPool(pool.omegas, [None] * len(pool)))
    with pytest.raises(ValueError):
        cluster_report(RepresentationPool(pool.omegas, ["one"] * len(pool)))


def test_family_samplers():
    families = family_samplers()
    assert list(families) == [*SHUFFLED_KINDS, "real"]
    assert "real" not in family_samplers(include_real=False)


def test_labelled_family_pairs():
    images = procedural_images("texture", 3, 0, (48, 64))
    items = labelled_family_pairs(images, 2, 0, crop_size=32)
    assert len(items) == 2 * 5
    assert [label for _, _, label in items][::2] == [*SHUFFLED_KINDS, "real"]
    for lq, hq, _ in items:
        assert lq.shape == hq.shape == (3, 32, 32)


def test_shared_recipe_items_use_one_recipe():
    faces = procedural_images("face", 2, 0, (40, 48))
    naturals = procedural_images("texture", 2, 1, (40, 48))
    items = shared_recipe_items(faces, naturals, SamplerConfig(), 3, 0, crop_size=32)
    assert len(items) == 3
    first = shared_recipe_items(faces, naturals, SamplerConfig(), 3, 0, crop_size=32)
    assert [i.recipe for i in items] == [i.recipe for i in first]
    for item in items:
        assert item.face_lq.shape == item.natural_lq.shape == (3, 32, 32)


def test_consistency_report_columns():
    networks = tiny_networks()
    faces = procedural_images("face", 2, 0, (40, 48))
    naturals = procedural_images("texture", 2, 1, (40, 48))
    items = shared_recipe_items(faces, naturals, SamplerConfig(), 2, 0, crop_size=32)
    result = consistency_report(items, networks.encoder, networks.synnet)
    assert list(result.table.columns) == ["swap_mse", "own_mse", "synth_psnr", "baseline_psnr"]
    assert len(result.table) == 2
    assert np.isfinite(result.swap_ratio) and np.isfinite(result.fidelity_gain_db)
    with pytest.raises(ValueError):
        consistency_report([], networks.encoder, networks.synnet)


def test_degradation_space_distance():
    pool = separated_pool()
    assert degradation_space_distance(pool, pool) == pytest.approx(0.0, abs=1e-6)
    shift = torch.zeros(OMEGA_DIM)
    shift[-1] = 3.0
    moved = RepresentationPool(pool.omegas + shift, pool.labels)
    assert degradation_space_distance(pool, moved) == pytest.approx(3.0, rel=1e-4)
    with pytest.raises(ValueError):
        degradation_space_distance(pool, RepresentationPool())


def test_evaluate_pairs(tmp_path):
    for sub in ("lq", "hq"):
        os.makedirs(tmp_path / sub)
    hq = random_image(0, 3, 32, 32)
    save_image(hq, str(tmp_path / "hq" / "same.png"))
    save_image(hq, str(tmp_path / "lq" / "same.png"))
    save_image(random_image(1, 3, 32, 32), str(tmp_path / "hq" / "other.png"))
    save_image(random_image(2, 3, 16, 16), str(tmp_path / "lq" / "other.png"))

    table = evaluate_pairs(str(tmp_path))
    assert list(table.columns) == ["name", "psnr", "ssim"]
    same = table[table["name"] == "same.png"].iloc[0]
    assert same["psnr"] == 99.0 and same["ssim"] == pytest.approx(1.0)
    assert table[table["name"] == "other.png"].iloc[0]["psnr"] < 99.0

    with pytest.raises(NotImplementedError):
        evaluate_pairs(str(tmp_path), ["lpips"])
