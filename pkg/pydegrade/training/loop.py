"""Joint training of the encoder, the generator and the conditional discriminator."""
from __future__ import annotations

import dataclasses
import logging
import math
import os
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import pandas as pd
import pyro
import torch
import tqdm

from pydegrade.config import TrainConfig
from pydegrade.errors import TrainingDivergenceError
from pydegrade.imaging.tensor import ImageTensor
from pydegrade.losses import (
    LossParts,
    LossWeights,
    consistency_loss,
    d_loss,
    disentanglement_loss,
    g_loss,
    mse_perceptual_loss,
    parameter_sqnorm,
    style_loss,
    total_loss,
)
from pydegrade.models.discriminator import ConditionalDiscriminator
from pydegrade.models.encoder import DegradationEncoder
from pydegrade.models.synthesizer import SynthesisNetwork
from pydegrade.nn.checkpoint import load_archive, load_checkpoint, save_checkpoint
from pydegrade.nn.features import FeatureExtractor, RandomPyramidExtractor, vgg19_extractor
from pydegrade.nn.layers import evaluation
from pydegrade.training.data import (
    Pair,
    TrainingBatch,
    derive_seed,
    held_out_real_pairs,
    load_image_dir,
    load_pair_dir,
    make_training_batch,
    prefetch,
    procedural_images,
)

# Streams of derive_seed keys, so train, validation and data generation never collide.
_TRAIN_STREAM, _VALIDATION_STREAM, _FACE_STREAM, _NATURAL_STREAM, _REAL_STREAM = range(5)


@dataclass
class Networks:
    encoder: DegradationEncoder
    synnet: SynthesisNetwork
    discriminator: ConditionalDiscriminator
    extractor: FeatureExtractor

    def trainable(self) -> Dict[str, torch.nn.Module]:
        return {
            "encoder": self.encoder,
            "synnet": self.synnet,
            "discriminator": self.discriminator,
        }


@dataclass
class Optimizers:
    generator: torch.optim.Optimizer
    discriminator: torch.optim.Optimizer

    def as_dict(self) -> Dict[str, torch.optim.Optimizer]:
        return {"generator": self.generator, "discriminator": self.discriminator}

    def set_lr(self, lr: float) -> None:
        for optimizer in self.as_dict().values():
            for group in optimizer.param_groups:
                group["lr"] = lr


def build_networks(config: TrainConfig) -> Networks:
    if config.vgg_weights:
        extractor: FeatureExtractor = vgg19_extractor(config.vgg_weights)
    else:
        extractor = RandomPyramidExtractor(seed=config.extractor_seed)
    return Networks(
        encoder=DegradationEncoder(config.degnet_config()),
        synnet=SynthesisNetwork(config.synnet_config()),
        discriminator=ConditionalDiscriminator(config.discriminator_config()),
        extractor=extractor,
    )


def build_optimizers(networks: Networks, lr: float, betas=(0.5, 0.999)) -> Optimizers:
    generator_params = list(networks.encoder.parameters()) + list(networks.synnet.parameters())
    return Optimizers(
        generator=torch.optim.Adam(generator_params, lr=lr, betas=betas),
        discriminator=torch.optim.Adam(networks.discriminator.parameters(), lr=lr, betas=betas),
    )


class PlateauHalver:
    """
    Halve the learning rate once the monitored value has failed to improve by more
    than `threshold` (relative) for `patience` consecutive evaluations.
    """

    def __init__(self, lr: float, patience: int = 5, threshold: float = 0.01):
        self.lr = lr
        self.patience = patience
        self.threshold = threshold
        self.best = math.inf
        self.bad_evaluations = 0
        self.halvings = 0

    def update(self, value: float) -> bool:
        if value < self.best * (1.0 - self.threshold):
            self.best = value
            self.bad_evaluations = 0
            return False
        self.bad_evaluations += 1
        if self.bad_evaluations < self.patience:
            return False
        self.lr *= 0.5
        self.halvings += 1
        self.bad_evaluations = 0
        return True

    def state_dict(self) -> Dict[str, float]:
        return {
            "lr": self.lr,
            "best": self.best,
            "bad_evaluations": self.bad_evaluations,
            "halvings": self.halvings,
        }

    def load_state_dict(self, state: Dict[str, float]) -> None:
        self.lr = state["lr"]
        self.best = state["best"]
        self.bad_evaluations = int(state["bad_evaluations"])
        self.halvings = int(state["halvings"])


def _encode(encoder: DegradationEncoder, batch: TrainingBatch):
    # One forward pass, so all three representations share one parameter snapshot.
    lq = torch.cat([batch.face_real_lq, batch.face_syn_lq, batch.natural_syn_lq])
    hq = torch.cat([batch.face_hq, batch.face_hq, batch.natural_hq])
    return encoder(lq, hq).split(batch.size)


def compute_parts(
    batch: TrainingBatch,
    networks: Networks,
    weights: LossWeights,
    omegas=None,
    fake_face: Optional[torch.Tensor] = None,
) -> LossParts:
    omega_rea_f, omega_syn_f, omega_syn_n = omegas if omegas is not None else _encode(networks.encoder, batch)
    if fake_face is None:
        fake_face = networks.synnet(batch.face_hq, omega_rea_f)

    if weights.lambda_disen > 0:
        disen = disentanglement_loss(
            omega_syn_f,
            omega_syn_n,
            omega_rea_f,
            weights.theta_decay * parameter_sqnorm(networks.encoder),
            weights.contrast_lambda,
            weights.contrast_eps,
        )
    else:
        disen = fake_face.new_zeros(())

    extractor = networks.extractor
    return LossParts(
        disen=disen,
        mse=mse_perceptual_loss(fake_face, batch.face_real_lq, extractor, weights.feature_weight),
        style=style_loss(fake_face, batch.face_real_lq, extractor),
        g=g_loss(networks.discriminator, fake_face, batch.face_hq, omega_rea_f),
        cons=consistency_loss(
            networks.synnet,
            batch.natural_hq,
            omega_syn_f,
            batch.natural_syn_lq,
            batch.face_hq,
            omega_syn_n,
            batch.face_syn_lq,
            extractor,
            weights.feature_weight,
        ),
    )


def _check_parameters(networks: Networks, step: int, provenance: List[str]) -> None:
    for module_name, module in networks.trainable().items():
        for name, p in module.named_parameters():
            if not torch.isfinite(p).all():
                raise TrainingDivergenceError(
                    f"parameters:{module_name}.{name}", step=step, provenance=provenance
                )


def train_step(
    batch: TrainingBatch,
    networks: Networks,
    optimizers: Optimizers,
    weights: LossWeights = LossWeights(),
    *,
    step: int = 0,
) -> Dict[str, float]:
    """
    One discriminator update followed by one joint encoder + generator update.

    Returns every loss component of the step. Raises TrainingDivergenceError naming
    the component, the step and the batch recipes when a loss or a parameter stops
    being finite.
    """
    for module in networks.trainable().values():
        module.train()
    provenance = batch.provenance()

    omegas = _encode(networks.encoder, batch)
    fake_face = networks.synnet(batch.face_hq, omegas[0])

    optimizers.discriminator.zero_grad()
    loss_d = d_loss(networks.discriminator, batch.face_real_lq, fake_face, batch.face_hq, omegas[0])
    if not torch.isfinite(loss_d):
        raise TrainingDivergenceError("d", step=step, provenance=provenance)
    loss_d.backward()
    optimizers.discriminator.step()

    optimizers.generator.zero_grad()
    parts = compute_parts(batch, networks, weights, omegas, fake_face)
    loss = total_loss(parts, weights, step=step, provenance=provenance)
    loss.backward()
    optimizers.generator.step()

    _check_parameters(networks, step, provenance)
    return {"d": float(loss_d), **parts.as_dict(), "total": float(loss)}


def evaluate_losses(
    batch: TrainingBatch, networks: Networks, weights: LossWeights = LossWeights()
) -> Dict[str, float]:
    """Loss components of `batch` in eval mode, without touching any state."""
    with torch.no_grad(), evaluation(*networks.trainable().values()):
        parts = compute_parts(batch, networks, weights)
        return {**parts.as_dict(), "total": float(total_loss(parts, weights))}


class MetricsLog:
    """Append-only `step<TAB>name<TAB>value` log; values are written with repr."""

    def __init__(self, path: str):
        self.path = path
        with open(path, "w"):
            pass

    def write(self, step: int, values: Dict[str, float]) -> None:
        with open(self.path, "a") as f:
            for name, value in values.items():
                f.write(f"{step}\t{name}\t{float(value)!r}\n")


def read_metrics_log(path: str) -> pd.DataFrame:
    if os.path.getsize(path) == 0:
        return pd.DataFrame(
            {
                "step": pd.Series(dtype=int),
                "name": pd.Series(dtype=str),
                "value": pd.Series(dtype=float),
            }
        )
    return pd.read_csv(
        path,
        sep="\t",
        names=["step", "name", "value"],
        dtype={"step": int, "name": str, "value": float},
    )


@dataclass
class TrainingData:
    face_pairs: Sequence[Pair]
    natural_images: Sequence[ImageTensor]
    val_face_pairs: Sequence[Pair]
    val_natural_images: Sequence[ImageTensor]


def load_training_data(config: TrainConfig) -> TrainingData:
    """
    Read the configured folders, falling back to the procedural corpus (faces degraded
    by the held-out family, textures as natural images). The last `val_images` items
    of every source are held out for validation.
    """
    sizes = (config.image_size_min, config.image_size_max)
    if config.face_pairs_dir:
        face_pairs: List[Pair] = [(lq, hq) for lq, hq, _ in load_pair_dir(config.face_pairs_dir)]
    else:
        faces = procedural_images(
            "face", config.train_faces + config.val_images, derive_seed(config.seed, _FACE_STREAM), sizes
        )
        face_pairs = held_out_real_pairs(faces, derive_seed(config.seed, _REAL_STREAM))
    if config.natural_dir:
        naturals = load_image_dir(config.natural_dir)
    else:
        naturals = procedural_images(
            "texture",
            config.train_naturals + config.val_images,
            derive_seed(config.seed, _NATURAL_STREAM),
            sizes,
        )

    def split(items):
        n_val = min(config.val_images, len(items) - 1)
        if n_val < 1:
            raise ValueError("Need at least two images per source to hold out validation data")
        return items[:-n_val], items[-n_val:]

    train_faces, val_faces = split(face_pairs)
    train_naturals, val_naturals = split(naturals)
    return TrainingData(train_faces, train_naturals, val_faces, val_naturals)


@dataclass
class TrainingResult:
    networks: Networks
    checkpoint_path: str
    metrics_path: str
    lr: float
    steps: int


def checkpoint_path(output_dir: str, step: int) -> str:
    return os.path.join(output_dir, f"step_{step:08d}.ckpt")


def save_training_state(
    path: str,
    config: TrainConfig,
    networks: Networks,
    optimizers: Optimizers,
    scheduler: PlateauHalver,
    step: int,
) -> None:
    save_checkpoint(
        path,
        networks.trainable(),
        optimizers.as_dict(),
        {
            "step": step,
            "lr": scheduler.lr,
            "scheduler": scheduler.state_dict(),
            "train_config": dataclasses.asdict(config),
        },
    )


def load_networks(path: str) -> Networks:
    """Rebuild the networks described by a training checkpoint and load its weights."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    metadata = load_archive(path)[1]["user"]
    networks = build_networks(TrainConfig(**metadata["train_config"]))
    load_checkpoint(path, networks.trainable())
    for module in networks.trainable().values():
        module.eval()
    return networks


def validation_mse(
    batches: Sequence[TrainingBatch], networks: Networks, weights: LossWeights
) -> float:
    return sum(evaluate_losses(b, networks, weights)["mse"] for b in batches) / len(batches)


def run_training(
    config: TrainConfig,
    data: Optional[TrainingData] = None,
    *,
    progress_hook: Callable[[int, Dict[str, float]], None] = lambda step, report: None,
    verbose: bool = False,
) -> TrainingResult:
    """
    Train from scratch for `config.max_steps` steps, writing checkpoints and the
    metrics log into `config.output_dir`.
    """
    pyro.set_rng_seed(config.seed)
    data = data if data is not None else load_training_data(config)
    os.makedirs(config.output_dir, exist_ok=True)

    networks = build_networks(config)
    optimizers = build_optimizers(networks, config.learning_rate, (config.beta1, config.beta2))
    scheduler = PlateauHalver(config.learning_rate, config.plateau_patience, config.plateau_threshold)
    weights = config.loss_weights()
    sampler = config.sampler_config()

    def make_batch(key: int, faces=data.face_pairs, naturals=data.natural_images) -> TrainingBatch:
        return make_training_batch(
            faces, naturals, sampler, key, batch_size=config.batch_size, crop_size=config.crop_size
        )

    validation = [
        make_batch(derive_seed(config.seed, _VALIDATION_STREAM, i), data.val_face_pairs, data.val_natural_images)
        for i in range(config.validation_batches)
    ]
    metrics = MetricsLog(os.path.join(config.output_dir, "metrics.tsv"))

    last_checkpoint = checkpoint_path(config.output_dir, 0)
    save_training_state(last_checkpoint, config, networks, optimizers, scheduler, 0)

    keys = (derive_seed(config.seed, _TRAIN_STREAM, step) for step in range(config.max_steps))
    batches = prefetch(make_batch, keys, workers=config.num_workers, depth=config.prefetch_depth)
    progress = tqdm.tqdm(total=config.max_steps, disable=not verbose)
    for step, batch in enumerate(batches, start=1):
        report = train_step(batch, networks, optimizers, weights, step=step)
        report["lr"] = scheduler.lr
        metrics.write(step, report)
        progress_hook(step, report)
        progress.update(1)

        if step % config.eval_every == 0:
            val_mse = validation_mse(validation, networks, weights)
            metrics.write(step, {"val_mse": val_mse})
            logging.info("step %d: validation mse %.6g", step, val_mse)
            if scheduler.update(val_mse):
                optimizers.set_lr(scheduler.lr)
                logging.info("step %d: validation mse plateaued, lr halved to %g", step, scheduler.lr)

        if step % config.checkpoint_every == 0 or step == config.max_steps:
            last_checkpoint = checkpoint_path(config.output_dir, step)
            save_training_state(last_checkpoint, config, networks, optimizers, scheduler, step)
    progress.close()

    return TrainingResult(networks, last_checkpoint, metrics.path, scheduler.lr, config.max_steps)
