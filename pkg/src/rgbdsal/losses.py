"""Training objectives: supervised, consistency, warm-up, and the total loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import EmptyLabeledBatch, OutOfRange, ShapeMismatch, WrongLevelCount

BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0        # depth MSE weight in the supervised loss
    gamma: float = 0.1        # attention term weight in the consistency loss
    beta1: float = 0.01       # labeled reconstruction weight
    beta2: float = 1.0        # unlabeled reconstruction weight
    lambda_max: float = 1.0   # warm-up ceiling

    def __post_init__(self):
        for name in ("alpha", "gamma", "beta1", "beta2", "lambda_max"):
            if getattr(self, name) < 0:
                raise OutOfRange(f"{name} must be nonnegative")


def _check_shapes(a, b, what):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what} operands differ",
                            expected=tuple(a.shape), actual=tuple(b.shape))


def binary_cross_entropy(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean BCE with predictions clamped to [eps, 1-eps] for finiteness."""
    _check_shapes(pred, target, "bce")
    p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS)
    return -(target * p.log() + (1.0 - target) * (1.0 - p).log()).mean()


def supervised_loss(p_s, g_s, p_d=None, g_d=None, alpha: float = 1.0):
    """BCE(p_s, g_s) + alpha * MSE(p_d, g_d); depth pair optional for the
    depth-branch-free ablation."""
    loss = binary_cross_entropy(p_s, g_s)
    if p_d is not None:
        if g_d is None:
            raise ShapeMismatch("depth prediction given without depth target")
        _check_shapes(p_d, g_d, "depth mse")
        loss = loss + alpha * F.mse_loss(p_d, g_d)
    return loss


def consistency_loss(s_sal, t_sal, s_attn=(), t_attn=(), gamma: float = 0.1):
    """MSE between saliency maps plus gamma * sum of per-level attention MSEs."""
    _check_shapes(s_sal, t_sal, "consistency saliency")
    if len(s_attn) != len(t_attn):
        raise WrongLevelCount(
            f"attention lists differ: {len(s_attn)} vs {len(t_attn)}")
    loss = F.mse_loss(s_sal, t_sal)
    for i, (sa, ta) in enumerate(zip(s_attn, t_attn), start=1):
        _check_shapes(sa, ta, f"consistency attention level {i}")
        loss = loss + gamma * F.mse_loss(sa, ta)
    return loss


def lambda_warmup(t: float, t_max: float, lambda_max: float = 1.0) -> float:
    """Gaussian ramp: lambda_max * exp(-5 * (1 - t/t_max)^2)."""
    if t_max <= 0:
        raise OutOfRange(f"t_max must be positive, got {t_max}")
    if not 0 <= t <= t_max:
        raise OutOfRange(f"t={t} outside [0, {t_max}]")
    return lambda_max * math.exp(-5.0 * (1.0 - t / t_max) ** 2)


def total_loss(labeled_terms, unlabeled_terms=(), weights=LossWeights(),
               t: float = 0, t_max: float = 1):
    """Combine per-sample (or per-batch) loss terms.

    labeled_terms: sequence of (supervised, reconstruction_sum) pairs.
    unlabeled_terms: sequence of (consistency, reconstruction_sum) pairs.
    Reconstruction sums may be None (reconstruction ablated), treated as 0.
    Means are taken over each sequence; the unlabeled mean is scaled by the
    warm-up factor at iteration t.
    """
    labeled_terms = list(labeled_terms)
    if not labeled_terms:
        raise EmptyLabeledBatch("at least one labeled term required")
    total = sum(s + (0 if r is None else weights.beta1 * r)
                for s, r in labeled_terms) / len(labeled_terms)
    unlabeled_terms = list(unlabeled_terms)
    if unlabeled_terms:
        lam = lambda_warmup(t, t_max, weights.lambda_max)
        unl = sum(c + (0 if r is None else weights.beta2 * r)
                  for c, r in unlabeled_terms) / len(unlabeled_terms)
        total = total + lam * unl
    return total
