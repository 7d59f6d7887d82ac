"""
Training objectives: representation disentanglement, pixel + perceptual fidelity,
Gram-matrix style, conditional hinge adversarial terms and swap consistency, and the
weighted total.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Dict, List, Optional

import torch
import torch.nn.functional as F

from pydegrade.errors import ShapeError, TrainingDivergenceError
from pydegrade.nn.features import FeatureExtractor, gram_matrix, perceptual_features


@dataclass(frozen=True)
class LossWeights:
    lambda_disen: float = 5.0
    lambda_mse: float = 1.0
    lambda_real: float = 0.1
    lambda_cons: float = 2.0
    style_weight: float = 0.1
    feature_weight: float = 0.1
    contrast_lambda: float = 1.0
    contrast_eps: float = 0.01
    # Multiplies the 1/2 ||Theta||^2 term on the encoder parameters.
    theta_decay: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if self.contrast_eps <= 0:
            raise ValueError("contrast_eps must be positive")

    def scaled(self, factor: float) -> "LossWeights":
        """Weights with every outer lambda multiplied by `factor`."""
        return LossWeights(
            lambda_disen=self.lambda_disen * factor,
            lambda_mse=self.lambda_mse * factor,
            lambda_real=self.lambda_real * factor,
            lambda_cons=self.lambda_cons * factor,
            style_weight=self.style_weight,
            feature_weight=self.feature_weight,
            contrast_lambda=self.contrast_lambda,
            contrast_eps=self.contrast_eps,
            theta_decay=self.theta_decay,
        )


@dataclass
class LossParts:
    disen: torch.Tensor
    mse: torch.Tensor
    style: torch.Tensor
    g: torch.Tensor
    cons: torch.Tensor

    def as_dict(self) -> Dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")


def parameter_sqnorm(module: torch.nn.Module) -> torch.Tensor:
    return sum(p.pow(2).sum() for p in module.parameters() if p.requires_grad)


def disentanglement_loss(
    omega_syn_f: torch.Tensor,
    omega_syn_n: torch.Tensor,
    omega_rea_f: torch.Tensor,
    theta_deg_sqnorm,
    contrast_lambda: float = 1.0,
    contrast_eps: float = 0.01,
) -> torch.Tensor:
    """
    Pull together representations of two contents degraded by one recipe, push away
    the representation of the same content under a different (real) degradation:

        ||syn_f - syn_n||^2 + lambda / (||syn_f - rea_f||^2 + eps) + theta_deg_sqnorm / 2

    Vectors may be single [512] or batched [N, 512]; batches are averaged.
    """
    _check_same_shape(omega_syn_f, omega_syn_n, "disentanglement_loss")
    _check_same_shape(omega_syn_f, omega_rea_f, "disentanglement_loss")
    attract = (omega_syn_f - omega_syn_n).pow(2).sum(dim=-1)
    repel = contrast_lambda / ((omega_syn_f - omega_rea_f).pow(2).sum(dim=-1) + contrast_eps)
    return (attract + repel).mean() + 0.5 * theta_deg_sqnorm


def mse_perceptual_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    extractor: FeatureExtractor,
    feature_weight: float = 0.1,
) -> torch.Tensor:
    """Mean squared error in pixel space plus `feature_weight` times the mean squared
    error of every extractor stage."""
    _check_same_shape(pred, target, "mse_perceptual_loss")
    loss = F.mse_loss(pred, target)
    for fp, ft in zip(perceptual_features(pred, extractor), perceptual_features(target, extractor)):
        loss = loss + feature_weight * F.mse_loss(fp, ft)
    return loss


def style_loss(pred: torch.Tensor, target: torch.Tensor, extractor: FeatureExtractor) -> torch.Tensor:
    _check_same_shape(pred, target, "style_loss")
    loss = pred.new_zeros(())
    for fp, ft in zip(perceptual_features(pred, extractor), perceptual_features(target, extractor)):
        _, c, h, w = fp.shape
        diff = (gram_matrix(fp) - gram_matrix(ft)).pow(2).sum(dim=(1, 2))
        loss = loss + (diff / (c * h * w)).mean()
    return loss


def hinge_d_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    return F.relu(1.0 - real_scores).mean() + F.relu(1.0 + fake_scores).mean()


def hinge_g_loss(fake_scores: torch.Tensor) -> torch.Tensor:
    return -fake_scores.mean()


def d_loss(
    discriminator: torch.nn.Module,
    real_lq: torch.Tensor,
    fake_lq: torch.Tensor,
    hq: torch.Tensor,
    omega: torch.Tensor,
) -> torch.Tensor:
    """
    Hinge loss of the conditional discriminator. The fake images and the conditions
    are detached, so no gradient reaches the encoder or generator.
    """
    _check_same_shape(real_lq, fake_lq, "d_loss")
    n = real_lq.shape[0]
    hq, omega = hq.detach(), omega.detach()
    scores = discriminator(
        torch.cat([real_lq, fake_lq.detach()]), torch.cat([hq, hq]), torch.cat([omega, omega])
    )
    return hinge_d_loss(scores[:n], scores[n:])


def g_loss(
    discriminator: torch.nn.Module,
    fake_lq: torch.Tensor,
    hq: torch.Tensor,
    omega: torch.Tensor,
) -> torch.Tensor:
    _check_same_shape(fake_lq, hq, "g_loss")
    return hinge_g_loss(discriminator(fake_lq, hq, omega))


def consistency_loss(
    synnet: torch.nn.Module,
    i_h_n: torch.Tensor,
    omega_syn_f: torch.Tensor,
    i_synl_n: torch.Tensor,
    i_pseh_f: torch.Tensor,
    omega_syn_n: torch.Tensor,
    i_synl_f: torch.Tensor,
    extractor: FeatureExtractor,
    feature_weight: float = 0.1,
) -> torch.Tensor:
    """Swap the two representations of one recipe: each must still reproduce the other
    branch's LQ target."""
    natural = mse_perceptual_loss(synnet(i_h_n, omega_syn_f), i_synl_n, extractor, feature_weight)
    face = mse_perceptual_loss(synnet(i_pseh_f, omega_syn_n), i_synl_f, extractor, feature_weight)
    return natural + face


def total_loss(
    parts: LossParts,
    weights: LossWeights = LossWeights(),
    *,
    step: Optional[int] = None,
    provenance: Optional[List[str]] = None,
) -> torch.Tensor:
    """
    Weighted objective of the joint encoder/generator step. The realistic term is
    style_weight * style + adversarial. A non-finite part raises
    TrainingDivergenceError naming that part.
    """
    for f in fields(parts):
        value = getattr(parts, f.name)
        if not torch.isfinite(torch.as_tensor(value)).all():
            raise TrainingDivergenceError(f.name, step=step, provenance=provenance)
    realistic = weights.style_weight * parts.style + parts.g
    return (
        weights.lambda_disen * parts.disen
        + weights.lambda_mse * parts.mse
        + weights.lambda_real * realistic
        + weights.lambda_cons * parts.cons
    )
