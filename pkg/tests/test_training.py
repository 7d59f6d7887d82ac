import dataclasses
import os

import numpy as np
import pytest
import torch

from pydegrade.degradation.recipe import deserialize_recipe
from pydegrade.degradation.sampler import IDENTITY_CONFIG, SamplerConfig
from pydegrade.errors import ArchiveFormatError, ShapeError, TrainingDivergenceError
from pydegrade.imaging.tensor import ImageTensor, load_image, save_image
from pydegrade.models.encoder import OMEGA_DIM, extract_representation
from pydegrade.nn.checkpoint import load_checkpoint
from pydegrade.training.data import (
    derive_seed,
    held_out_real_pairs,
    load_image_dir,
    load_pair_dir,
    make_training_batch,
    prefetch,
    procedural_images,
)
from pydegrade.training.export import (
    MANIFEST_COLUMNS,
    modcrop,
    replay_manifest,
    specific_scenario_pairs,
    synthesize_pairs,
)
from pydegrade.training.loop import (
    PlateauHalver,
    TrainingData,
    build_optimizers,
    checkpoint_path,
    evaluate_losses,
    load_networks,
    load_training_data,
    read_metrics_log,
    run_training,
    save_training_state,
    train_step,
)
from pydegrade.training.pool import (
    RepresentationPool,
    augment_pairs,
    build_pool,
    load_pool,
    pool_from_bytes,
    pool_to_bytes,
    sample_pool,
    sample_pool_index,
    sample_pool_indices,
    save_pool,
)

from .fixtures import (
    SEEDS,
    TINY_TRAIN_CONFIG,
    check_images_equal,
    check_parameters_equal,
    random_image,
    random_images,
    tiny_networks,
)

LOSS_KEYS = {"d", "disen", "mse", "style", "g", "cons", "total"}


def tiny_data(seed: int = 0) -> TrainingData:
    faces = procedural_images("face", 6, seed, (32, 40))
    face_pairs = held_out_real_pairs(faces, seed)
    naturals = procedural_images("texture", 6, seed + 1, (32, 40))
    return TrainingData(face_pairs[:4], naturals[:4], face_pairs[4:], naturals[4:])


def tiny_batch(seed: int = 0, sampler: SamplerConfig = SamplerConfig(), batch_size: int = 2):
    data = tiny_data()
    return make_training_batch(
        data.face_pairs, data.natural_images, sampler, seed, batch_size=batch_size, crop_size=32
    )


def identity_synnet(networks):
    with torch.no_grad():
        networks.synnet.to_rgb.weight.zero_()
        networks.synnet.to_rgb.bias.zero_()
    return networks.synnet


def write_pairs(root, images_lq, images_hq, names):
    for sub in ("lq", "hq"):
        os.makedirs(os.path.join(root, sub), exist_ok=True)
    for lq, hq, name in zip(images_lq, images_hq, names):
        save_image(lq, os.path.join(root, "lq", name))
        save_image(hq, os.path.join(root, "hq", name))


# Data


def test_derive_seed_is_stable_and_separates_keys():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(0, i) for i in range(100)}) == 100
    assert derive_seed(1, 2) != derive_seed(2, 1)


@pytest.mark.parametrize("kind", ["face", "texture"])
def test_procedural_images(kind):
    images = procedural_images(kind, 5, 3, (32, 48))
    assert len(images) == 5
    for img in images:
        assert img.channels == 3 and img.height == img.width and 32 <= img.height <= 48
    again = procedural_images(kind, 5, 3, (32, 48))
    assert all(check_images_equal(a, b) for a, b in zip(images, again))


def test_procedural_images_unknown_kind():
    with pytest.raises(NotImplementedError):
        procedural_images("car", 1, 0)


def test_held_out_pairs_are_aligned_and_degraded():
    faces = procedural_images("face", 3, 0, (32, 32))
    for lq, hq in held_out_real_pairs(faces, 0):
        assert lq.shape == hq.shape
        assert not torch.equal(lq.data, hq.data)


def test_load_pair_dir(tmp_path):
    lq = [random_image(i, 1, 32, 32) for i in range(2)]
    hq = [random_image(10 + i, 3, 32, 32) for i in range(2)]
    write_pairs(str(tmp_path), lq, hq, ["a.png", "b.png"])
    pairs = load_pair_dir(str(tmp_path))
    assert [name for _, _, name in pairs] == ["a.png", "b.png"]
    assert all(p[0].channels == 3 for p in pairs)

    os.remove(os.path.join(tmp_path, "lq", "b.png"))
    with pytest.raises(ValueError):
        load_pair_dir(str(tmp_path))
    with pytest.raises(FileNotFoundError):
        load_pair_dir(str(tmp_path / "missing"))
    with pytest.raises(FileNotFoundError):
        load_image_dir(str(tmp_path / "missing"))


@pytest.mark.parametrize("seed", SEEDS)
def test_training_batch_is_deterministic(seed):
    first, second = tiny_batch(seed), tiny_batch(seed)
    for name in ("face_hq", "face_real_lq", "face_syn_lq", "natural_hq", "natural_syn_lq"):
        assert torch.equal(getattr(first, name), getattr(second, name))
        assert getattr(first, name).shape == (2, 3, 32, 32)
    assert first.recipes == second.recipes
    assert first.size == 2


def test_training_batch_depends_on_seed():
    assert not torch.equal(tiny_batch(0).face_hq, tiny_batch(1).face_hq)


def test_training_batch_records_shared_recipes():
    batch = tiny_batch(4, batch_size=3)
    assert len(batch.provenance()) == 3
    for text in batch.provenance():
        assert deserialize_recipe(text).kinds[-1] == "clip"


def test_identity_recipe_batch_keeps_crops():
    batch = tiny_batch(2, sampler=IDENTITY_CONFIG)
    assert torch.equal(batch.face_syn_lq, batch.face_hq)
    assert torch.equal(batch.natural_syn_lq, batch.natural_hq)


def test_training_batch_errors():
    data = tiny_data()
    with pytest.raises(ValueError):
        make_training_batch([], data.natural_images, SamplerConfig(), 0)
    with pytest.raises(ValueError):
        make_training_batch(data.face_pairs, data.natural_images, SamplerConfig(), 0, batch_size=0)


def test_prefetch_keeps_order():
    assert list(prefetch(lambda k: k * 2, range(10), workers=3, depth=2)) == [k * 2 for k in range(10)]
    assert list(prefetch(lambda k: k, [])) == []
    with pytest.raises(ValueError):
        list(prefetch(lambda k: k, range(2), workers=0))


# Loop


def test_plateau_halver_halves_after_patience():
    scheduler = PlateauHalver(2e-4, patience=5, threshold=0.01)
    halvings = [scheduler.update(1.0) for _ in range(11)]
    assert sum(halvings) == 2
    assert scheduler.lr == pytest.approx(5e-5)


def test_plateau_halver_resets_on_improvement():
    scheduler = PlateauHalver(1.0, patience=2, threshold=0.01)
    for value in (1.0, 0.995, 0.98, 0.97):
        scheduler.update(value)
    assert scheduler.lr == 1.0
    restored = PlateauHalver(0.0)
    restored.load_state_dict(scheduler.state_dict())
    assert restored.state_dict() == scheduler.state_dict()
    assert scheduler.update(0.97) is False and scheduler.update(0.97) is True
    assert scheduler.lr == 0.5


def test_train_step_reports_every_component():
    networks = tiny_networks()
    optimizers = build_optimizers(networks, 1e-4)
    report = train_step(tiny_batch(), networks, optimizers, TINY_TRAIN_CONFIG.loss_weights(), step=1)
    assert set(report) == LOSS_KEYS
    assert all(np.isfinite(v) for v in report.values())


def test_train_step_with_zero_lr_keeps_parameters():
    networks, reference = tiny_networks(0), tiny_networks(0)
    optimizers = build_optimizers(networks, 0.0)
    train_step(tiny_batch(), networks, optimizers, TINY_TRAIN_CONFIG.loss_weights())
    for name, module in networks.trainable().items():
        assert check_parameters_equal(module, reference.trainable()[name])


def test_train_step_changes_parameters():
    networks, reference = tiny_networks(0), tiny_networks(0)
    optimizers = build_optimizers(networks, 1e-3)
    train_step(tiny_batch(), networks, optimizers, TINY_TRAIN_CONFIG.loss_weights())
    for name in ("encoder", "synnet", "discriminator"):
        before = torch.cat([p.flatten() for p in reference.trainable()[name].parameters()])
        after = torch.cat([p.flatten() for p in networks.trainable()[name].parameters()])
        assert not torch.equal(before, after)


def test_train_step_detects_divergence():
    networks = tiny_networks()
    optimizers = build_optimizers(networks, 1e-4)
    batch = tiny_batch()
    batch.face_real_lq[0, 0, 0, 0] = float("nan")
    with pytest.raises(TrainingDivergenceError) as info:
        train_step(batch, networks, optimizers, TINY_TRAIN_CONFIG.loss_weights(), step=7)
    assert info.value.step == 7
    assert info.value.provenance == batch.recipes


def test_checkpoint_resume_replays_exactly(tmp_path):
    weights = TINY_TRAIN_CONFIG.loss_weights()
    networks = tiny_networks(0)
    optimizers = build_optimizers(networks, 1e-3)
    train_step(tiny_batch(0), networks, optimizers, weights, step=1)

    path = str(tmp_path / "resume.ckpt")
    scheduler = PlateauHalver(1e-3)
    save_training_state(path, TINY_TRAIN_CONFIG, networks, optimizers, scheduler, 1)

    resumed = tiny_networks(5)
    resumed_optimizers = build_optimizers(resumed, 1e-3)
    metadata = load_checkpoint(path, resumed.trainable(), resumed_optimizers.as_dict())
    assert metadata["step"] == 1
    assert metadata["scheduler"]["lr"] == 1e-3

    first = train_step(tiny_batch(1), networks, optimizers, weights, step=2)
    second = train_step(tiny_batch(1), resumed, resumed_optimizers, weights, step=2)
    assert first == second
    for name, module in networks.trainable().items():
        for p, q in zip(module.parameters(), resumed.trainable()[name].parameters()):
            assert torch.equal(p, q)


def test_evaluate_losses_leaves_state_untouched():
    networks, reference = tiny_networks(0), tiny_networks(0)
    report = evaluate_losses(tiny_batch(), networks, TINY_TRAIN_CONFIG.loss_weights())
    assert set(report) == LOSS_KEYS - {"d"}
    for name, module in networks.trainable().items():
        for key, value in module.state_dict().items():
            assert torch.equal(value, reference.trainable()[name].state_dict()[key])


def test_load_training_data_holds_out_validation():
    data = load_training_data(TINY_TRAIN_CONFIG)
    assert len(data.face_pairs) == 4 and len(data.val_face_pairs) == 2
    assert len(data.natural_images) == 4 and len(data.val_natural_images) == 2


def test_run_training_without_steps_writes_initial_checkpoint(tmp_path):
    config = dataclasses.replace(TINY_TRAIN_CONFIG, max_steps=0, output_dir=str(tmp_path))
    result = run_training(config, tiny_data())
    assert result.checkpoint_path == checkpoint_path(str(tmp_path), 0)
    assert os.path.exists(result.checkpoint_path)
    assert result.steps == 0
    assert read_metrics_log(result.metrics_path).empty


def test_run_training_logs_and_checkpoints(tmp_path):
    config = dataclasses.replace(TINY_TRAIN_CONFIG, output_dir=str(tmp_path))
    seen = []
    result = run_training(config, tiny_data(), progress_hook=lambda step, report: seen.append(step))
    assert seen == [1, 2]
    for step in (0, 1, 2):
        assert os.path.exists(checkpoint_path(str(tmp_path), step))

    metrics = read_metrics_log(result.metrics_path)
    assert set(metrics["step"]) == {1, 2}
    assert {"total", "d", "val_mse", "lr"} <= set(metrics["name"])

    loaded = load_networks(result.checkpoint_path)
    for name, module in result.networks.trainable().items():
        assert check_parameters_equal(module, loaded.trainable()[name])


def test_run_training_is_reproducible(tmp_path):
    reports = []
    for run in ("a", "b"):
        config = dataclasses.replace(TINY_TRAIN_CONFIG, output_dir=str(tmp_path / run))
        result = run_training(config, tiny_data())
        reports.append(read_metrics_log(result.metrics_path))
    assert reports[0].equals(reports[1])


def test_load_networks_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_networks(str(tmp_path / "none.ckpt"))


def test_train_config_fields_survive_checkpoint(tmp_path):
    config = dataclasses.replace(TINY_TRAIN_CONFIG, output_dir=str(tmp_path), max_steps=0)
    result = run_training(config, tiny_data())
    networks = load_networks(result.checkpoint_path)
    assert networks.encoder.config == config.degnet_config()


# Pool


def labelled_pool(labels):
    generator = torch.Generator().manual_seed(0)
    omegas = torch.randn(len(labels), OMEGA_DIM, generator=generator)
    return RepresentationPool(omegas, list(labels), [f"src-{i}" for i in range(len(labels))])


def test_pool_bytes_round_trip(tmp_path):
    pool = labelled_pool(["blur", None, "jpeg", "blur"])
    restored = pool_from_bytes(pool_to_bytes(pool))
    assert torch.equal(restored.omegas, pool.omegas)
    assert restored.labels == pool.labels
    assert restored.source_ids == pool.source_ids
    assert pool_to_bytes(pool).startswith(b"PDGPOOL\0")

    path = str(tmp_path / "pool.bin")
    save_pool(pool, path)
    assert torch.equal(load_pool(path).omegas, pool.omegas)
    assert pool.distinct_labels() == ["blur", "jpeg"]


@pytest.mark.parametrize(
    "corrupt",
    [
        lambda raw: b"BADPOOL\0" + raw[8:],
        lambda raw: raw[:-1],
        lambda raw: raw + b"x",
        lambda raw: raw[:8] + b"\x09" + raw[9:],
        lambda raw: raw[:16] + b"\x10" + raw[17:],
    ],
)
def test_corrupt_pool_raises(corrupt):
    raw = pool_to_bytes(labelled_pool(["a", "b"]))
    with pytest.raises(ArchiveFormatError):
        pool_from_bytes(corrupt(raw))


def test_pool_rejects_mismatched_metadata():
    with pytest.raises(ShapeError):
        RepresentationPool(torch.zeros(2, OMEGA_DIM), ["a"], ["x", "y"])


def test_uniform_sampling_frequency():
    pool = labelled_pool([None] * 10)
    indices = sample_pool_indices(pool, 100000, seed=0)
    frequencies = np.bincount(indices, minlength=10) / len(indices)
    assert np.all(np.abs(frequencies - 0.1) < 0.005)


def test_by_label_sampling_balances_labels():
    pool = labelled_pool(["common"] * 9 + ["rare"])
    indices = sample_pool_indices(pool, 20000, seed=1, strategy="by_label")
    assert abs(np.mean(indices == 9) - 0.5) < 0.02


def test_by_label_keeps_missing_and_empty_labels_apart():
    pool = labelled_pool([None, None, None, "", "a"])
    indices = sample_pool_indices(pool, 30000, seed=2, strategy="by_label")
    buckets = np.array([np.isin(indices, members).mean() for members in ([0, 1, 2], [3], [4])])
    assert np.all(np.abs(buckets - 1 / 3) < 0.02)


def test_sampling_is_seeded_and_unmodified():
    pool = labelled_pool(["a", "b", "c"])
    assert sample_pool_index(pool, 3) == sample_pool_index(pool, 3)
    omega = sample_pool(pool, 3)
    assert torch.equal(omega, pool.omegas[sample_pool_index(pool, 3)])


def test_sampling_errors():
    with pytest.raises(ValueError):
        sample_pool(RepresentationPool(), 0)
    with pytest.raises(NotImplementedError):
        sample_pool(labelled_pool(["a"]), 0, strategy="nearest")


def test_build_pool_matches_single_extraction():
    networks = tiny_networks()
    items = [(random_image(i, 3, 32, 32), random_image(10 + i, 3, 32, 32), "x") for i in range(3)]
    pool = build_pool(items, networks.encoder)
    assert len(pool) == 3 and pool.labels == ["x"] * 3
    expected = extract_representation(items[1][0], items[1][1], networks.encoder).float()
    assert torch.allclose(pool.omegas[1], expected)
    with pytest.raises(ShapeError):
        build_pool([(random_image(0, 3, 16, 16), random_image(1, 3, 32, 32), None)], networks.encoder)


def test_augment_pairs_keeps_alignment():
    lq, hq = random_image(0, 3, 40, 32), random_image(1, 3, 40, 32)
    items = augment_pairs([(lq, hq, "face")], copies=4, seed=0)
    assert len(items) == 5
    assert check_images_equal(items[0][0], lq)
    for a, b, label in items:
        assert a.shape == b.shape and label == "face"
    with pytest.raises(ValueError):
        augment_pairs([(lq, hq, None)], copies=-1, seed=0)
    with pytest.raises(ShapeError):
        augment_pairs([(random_image(0, 3, 16, 16), hq, None)], copies=1, seed=0)


# Export


@pytest.mark.parametrize("scale", [1, 2, 4])
def test_synthesize_pairs_sizes(tmp_path, scale):
    networks = tiny_networks()
    images = [random_image(0, 3, 37, 45), random_image(1, 3, 50, 33)]
    samples, manifest = synthesize_pairs(
        images, labelled_pool(["a", "b"]), networks.synnet, scale, 3, 0, str(tmp_path)
    )
    assert list(manifest.columns) == MANIFEST_COLUMNS
    assert len(samples) == len(manifest) == 3
    for sample, row in zip(samples, manifest.itertuples()):
        assert sample.hq.height % scale == 0 and sample.hq.width % scale == 0
        assert (sample.lq.height, sample.lq.width) == (sample.hq.height // scale, sample.hq.width // scale)
        assert load_image(os.path.join(tmp_path, row.lq_path)).shape == sample.lq.shape
    assert os.path.exists(os.path.join(tmp_path, "manifest.tsv"))


def test_manifest_replay_is_bit_exact(tmp_path):
    networks = tiny_networks()
    pool = labelled_pool(["a", "b", "c"])
    images = random_images(2, 3, size=40)
    synthesize_pairs(images, pool, networks.synnet, 2, 4, 11, str(tmp_path / "pairs"))
    written = replay_manifest(str(tmp_path / "pairs"), pool, networks.synnet, str(tmp_path / "replay"))
    assert len(written) == 4
    for path in written:
        original = os.path.join(tmp_path, "pairs", os.path.relpath(path, tmp_path / "replay"))
        assert check_images_equal(load_image(path), load_image(original))


def test_identity_generator_exports_clean_pairs(tmp_path):
    networks = tiny_networks()
    synnet = identity_synnet(networks)
    _, manifest = synthesize_pairs(random_images(2, 5, 32), labelled_pool(["a"]), synnet, 1, 2, 0, str(tmp_path))
    for row in manifest.itertuples():
        lq = load_image(os.path.join(tmp_path, row.lq_path))
        assert check_images_equal(lq, load_image(os.path.join(tmp_path, row.hq_path)))


def test_synthesize_pairs_from_folder(tmp_path):
    os.makedirs(tmp_path / "hq")
    for i, img in enumerate(random_images(2, 7, 32)):
        save_image(img, str(tmp_path / "hq" / f"n{i}.png"))
    networks = tiny_networks()
    _, manifest = synthesize_pairs(
        str(tmp_path / "hq"), labelled_pool(["a"]), networks.synnet, 1, 2, 0, str(tmp_path / "out")
    )
    assert set(manifest["source"]) <= {"n0.png", "n1.png"}


def test_synthesize_pairs_errors(tmp_path):
    networks = tiny_networks()
    images = random_images(1, 0, 32)
    with pytest.raises(ValueError):
        synthesize_pairs(images, labelled_pool(["a"]), networks.synnet, 3, 1, 0, str(tmp_path))
    with pytest.raises(ValueError):
        synthesize_pairs(images, RepresentationPool(), networks.synnet, 1, 1, 0, str(tmp_path))
    with pytest.raises(ValueError):
        synthesize_pairs(images, labelled_pool(["a"]), networks.synnet, 1, 0, 0, str(tmp_path))
    with pytest.raises(FileNotFoundError):
        replay_manifest(str(tmp_path / "none"), labelled_pool(["a"]), networks.synnet)


def test_modcrop():
    assert modcrop(random_image(0, 3, 37, 45), 4).shape == (3, 36, 44)
    assert modcrop(random_image(0, 3, 37, 45), 1).shape == (3, 37, 45)


def test_specific_scenario_pairs(tmp_path):
    networks = tiny_networks()
    face_hq = random_image(0, 3, 48, 48)
    face_lq = random_image(1, 3, 24, 24)
    pool, samples, manifest = specific_scenario_pairs(
        face_lq,
        face_hq,
        random_images(2, 2, 40),
        networks.encoder,
        networks.synnet,
        str(tmp_path),
        copies=3,
        count=2,
    )
    assert len(pool) == 4
    assert pool.labels == ["scenario"] * 4
    assert len(samples) == len(manifest) == 2
    assert isinstance(samples[0].lq, ImageTensor)


def test_single_step_descends_on_same_batch():
    weights = TINY_TRAIN_CONFIG.loss_weights()
    improved = 0
    for seed in range(10):
        networks = tiny_networks(seed)
        optimizers = build_optimizers(networks, 1e-4)
        batch = tiny_batch(seed)
        before = evaluate_losses(batch, networks, weights)["total"]
        train_step(batch, networks, optimizers, weights)
        improved += evaluate_losses(batch, networks, weights)["total"] < before
    assert improved >= 9
