import dataclasses
import os

import pytest

from pydegrade.config import load_config
from pydegrade.training.loop import load_training_data, read_metrics_log, run_training
from pydegrade.training.pool import build_pool
from pydegrade.training.report import (
    cluster_report,
    consistency_report,
    family_samplers,
    labelled_family_pairs,
    shared_recipe_items,
)

TOY_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "..", "configs", "toy.cfg")

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(
        os.environ.get("PYDEGRADE_RUN_SLOW") != "1",
        reason="toy training run; set PYDEGRADE_RUN_SLOW=1 to enable",
    ),
]


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    config = dataclasses.replace(
        load_config(TOY_CONFIG_PATH), output_dir=str(tmp_path_factory.mktemp("toy"))
    )
    data = load_training_data(config)
    result = run_training(config, data)
    return config, data, result


def test_families_separate_in_representation_space(toy_run):
    config, data, result = toy_run
    faces = [hq for _, hq in data.val_face_pairs]
    items = labelled_family_pairs(
        faces + list(data.val_natural_images),
        per_family=100,
        seed=config.seed + 1,
        families=family_samplers(include_real=False),
        crop_size=config.crop_size,
    )
    pool = build_pool(items, result.networks.encoder)
    assert len(pool) == 400

    report = cluster_report(pool, seed=config.seed)
    assert report.accuracy >= 0.90
    assert report.silhouette > 0.2


def test_swapped_representations_degrade_alike(toy_run):
    config, data, result = toy_run
    items = shared_recipe_items(
        [hq for _, hq in data.val_face_pairs],
        data.val_natural_images,
        config.sampler_config(),
        count=100,
        seed=config.seed + 2,
        crop_size=config.crop_size,
    )
    report = consistency_report(items, result.networks.encoder, result.networks.synnet)
    assert report.swap_ratio <= 1.5
    assert report.fidelity_gain_db >= 3.0


def test_training_metrics_are_reproducible(tmp_path):
    base = dataclasses.replace(load_config(TOY_CONFIG_PATH), max_steps=20, eval_every=10, checkpoint_every=10)
    logs = []
    for run in ("a", "b"):
        config = dataclasses.replace(base, output_dir=str(tmp_path / run))
        result = run_training(config)
        logs.append(read_metrics_log(result.metrics_path))
    assert logs[0].equals(logs[1])
