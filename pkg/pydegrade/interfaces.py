import os
from typing import Callable, Dict, Optional, Sequence, Union

import pandas as pd

from pydegrade.config import TrainConfig, load_config
from pydegrade.imaging.tensor import load_image
from pydegrade.integration_utils.custom_decorators import pydegrade_logging_wrapper
from pydegrade.training import report
from pydegrade.training.data import align_pair, load_pair_dir
from pydegrade.training.export import specific_scenario_pairs, synthesize_pairs
from pydegrade.training.loop import load_networks, read_metrics_log, run_training
from pydegrade.training.pool import (
    RepresentationPool,
    SamplingStrategy,
    augment_pairs,
    build_pool,
    load_pool,
    save_pool,
)

LABELS_FILE = "labels.tsv"


@pydegrade_logging_wrapper
def train(
    config: Union[str, TrainConfig],
    *,
    verbose: bool = False,
    progress_hook: Callable[[int, Dict[str, float]], None] = lambda step, report: None,
) -> Dict[str, object]:
    """
    Jointly train the degradation encoder, the generator and the discriminator.

    Args:
    config: Union[str, TrainConfig]
        - A TrainConfig, or the path of a `key = value` config file.
        - See `pydegrade.config` for the documented keys.
    verbose: bool
        - Show a progress bar.
    progress_hook: Callable[[int, Dict[str, float]], None]
        - Called after every step with the step number and the loss report.
        - Used to implement custom progress reporting.

    Returns:
        result: Dict[str, object]
            - checkpoint: str
                - Path of the last checkpoint written.
            - metrics: pd.DataFrame
                - The metrics log with columns step, name and value.
            - lr: float
                - Learning rate at the end of training.
    """
    if isinstance(config, str):
        config = load_config(config)
    result = run_training(config, progress_hook=progress_hook, verbose=verbose)
    return {
        "checkpoint": result.checkpoint_path,
        "metrics": read_metrics_log(result.metrics_path),
        "lr": result.lr,
    }


def _read_labels(pairs_dir: str) -> Dict[str, str]:
    path = os.path.join(pairs_dir, LABELS_FILE)
    if not os.path.exists(path):
        return {}
    table = pd.read_csv(path, sep="\t", names=["name", "label"], dtype=str)
    return dict(zip(table["name"], table["label"]))


@pydegrade_logging_wrapper
def extract_pool(
    pairs_dir: str,
    checkpoint_path: str,
    out_path: Optional[str] = None,
    *,
    augment_copies: int = 0,
    seed: int = 0,
) -> RepresentationPool:
    """
    Build a representation pool from a folder of (LQ, HQ) face pairs.

    Args:
    pairs_dir: str
        - Folder with `lq/` and `hq/` subfolders of PNGs matched by file name.
        - An optional `labels.tsv` (file name, label) labels the entries.
    checkpoint_path: str
        - Training checkpoint holding the encoder.
    out_path: Optional[str]
        - Where to write the pool file. Nothing is written when None.
    augment_copies: int
        - Rotated and resampled copies of every pair added before extraction.
    seed: int
        - Seed of the augmentation parameters.

    Returns:
        The pool, one entry per (augmented) pair.
    """
    networks = load_networks(checkpoint_path)
    labels = _read_labels(pairs_dir)
    items, names = [], []
    for lq, hq, name in load_pair_dir(pairs_dir):
        lq, hq = align_pair(lq, hq)
        items.append((lq, hq, labels.get(name)))
        names.append(name)

    augmented = augment_pairs(items, augment_copies, seed)
    source_ids = [f"{name}#{c}" for name in names for c in range(augment_copies + 1)]
    pool = build_pool(augmented, networks.encoder, source_ids)
    if out_path is not None:
        save_pool(pool, out_path)
    return pool


@pydegrade_logging_wrapper
def synth_pairs(
    hq_dir: str,
    pool_path: str,
    checkpoint_path: str,
    out_dir: str,
    *,
    scale: int = 1,
    count: int = 100,
    seed: int = 0,
    strategy: SamplingStrategy = "uniform",
) -> pd.DataFrame:
    """
    Transfer pooled degradations onto clean natural images and export the pairs.

    Args:
    hq_dir: str
        - Folder of clean natural PNGs.
    pool_path: str
        - Pool file written by `extract_pool`.
    checkpoint_path: str
        - Training checkpoint holding the generator.
    out_dir: str
        - Receives `hq/`, `lq/` and `manifest.tsv`.
    scale: int
        - 1, 2 or 4; LQ sides are the HQ sides divided by `scale`.
    count: int
        - Number of pairs.
    seed: int
        - Selection seed recorded per pair in the manifest.
    strategy: Literal["uniform", "by_label"]
        - Pool sampling strategy.

    Returns:
        The manifest.
    """
    if not os.path.exists(pool_path):
        raise FileNotFoundError(pool_path)
    networks = load_networks(checkpoint_path)
    _, manifest = synthesize_pairs(
        hq_dir, load_pool(pool_path), networks.synnet, scale, count, seed, out_dir, strategy=strategy
    )
    return manifest


@pydegrade_logging_wrapper
def scenario_pairs(
    face_lq_path: str,
    face_hq_path: str,
    hq_dir: str,
    checkpoint_path: str,
    out_dir: str,
    *,
    copies: int = 16,
    count: int = 100,
    scale: int = 1,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Export natural pairs carrying the degradation of one degraded face region.

    Args:
    face_lq_path: str
        - PNG of the degraded face region.
    face_hq_path: str
        - PNG of its restored (pseudo-HQ) counterpart.
    hq_dir, checkpoint_path, out_dir, count, scale, seed
        - As in `synth_pairs`.
    copies: int
        - Augmented copies of the face pair in the private pool.

    Returns:
        The manifest.
    """
    networks = load_networks(checkpoint_path)
    _, _, manifest = specific_scenario_pairs(
        load_image(face_lq_path),
        load_image(face_hq_path),
        hq_dir,
        networks.encoder,
        networks.synnet,
        out_dir,
        copies=copies,
        count=count,
        scale=scale,
        seed=seed,
    )
    return manifest


@pydegrade_logging_wrapper
def cluster_report(pool_path: str, *, seed: int = 0) -> report.ClusterReport:
    """
    Linear-classifier accuracy, silhouette score and confusion table of a labelled pool.

    Args:
    pool_path: str
        - Pool file whose entries all carry a label.
    seed: int
        - Seed of the train/test split and the classifier.
    """
    if not os.path.exists(pool_path):
        raise FileNotFoundError(pool_path)
    return report.cluster_report(load_pool(pool_path), seed=seed)


@pydegrade_logging_wrapper
def evaluate(pairs_dir: str, metrics: Sequence[str] = ("psnr", "ssim")) -> pd.DataFrame:
    """
    Full-reference metrics of every (LQ, HQ) pair in a folder.

    Args:
    pairs_dir: str
        - Folder with `lq/` and `hq/` subfolders.
    metrics: Sequence[str]
        - Registered metric names, "psnr" and "ssim" by default.
    """
    return report.evaluate_pairs(pairs_dir, metrics)
