"""Feature decoupling: split RGB pyramid levels into depth-aware and
depth-dispelled parts, reconstruct the originals for regularization, and
predict a depth map from the depth-aware stack."""

from __future__ import annotations

from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import require_levels
from .errors import ShapeMismatch
from .layers import ConvBlock


class DecoupledFeatures(NamedTuple):
    depth_aware: list      # per level, shape of the input level
    depth_dispelled: list  # per level, shape of the input level


def reconstruction_loss(r_tilde: torch.Tensor, r: torch.Tensor) -> torch.Tensor:
    """Mean squared error between a rebuilt level and the original."""
    if r_tilde.shape != r.shape:
        raise ShapeMismatch("reconstruction operands differ",
                            expected=tuple(r.shape), actual=tuple(r_tilde.shape))
    return F.mse_loss(r_tilde, r)


class FeatureDecoupler(nn.Module):
    """Per-level decoupling heads plus the reconstruction blocks.

    Each head is a ConvBlock keeping the level's channel count; the
    reconstruction block maps the concatenated pair back to it.
    """

    def __init__(self, channels, norm: str = "group"):
        super().__init__()
        self.channels = tuple(channels)
        self.aware = nn.ModuleList(ConvBlock(c, c, norm) for c in channels)
        self.dispel = nn.ModuleList(ConvBlock(c, c, norm) for c in channels)
        self.rebuild = nn.ModuleList(ConvBlock(2 * c, c, norm) for c in channels)

    def disentangle(self, levels) -> DecoupledFeatures:
        levels = require_levels(levels, len(self.aware))
        aware = [head(r) for head, r in zip(self.aware, levels)]
        dispelled = [head(r) for head, r in zip(self.dispel, levels)]
        return DecoupledFeatures(aware, dispelled)

    def reconstruct(self, r_d: torch.Tensor, r_s: torch.Tensor, level: int) -> torch.Tensor:
        if r_d.shape != r_s.shape:
            raise ShapeMismatch("decoupled pair differs", level=level,
                                expected=tuple(r_d.shape), actual=tuple(r_s.shape))
        return self.rebuild[level](torch.cat([r_d, r_s], dim=1))

    def reconstruction_losses(self, decoupled: DecoupledFeatures, levels) -> list:
        return [
            reconstruction_loss(self.reconstruct(a, s, i), r)
            for i, (a, s, r) in enumerate(
                zip(decoupled.depth_aware, decoupled.depth_dispelled, levels))
        ]


class DepthHead(nn.Module):
    """Fuse the depth-aware stack into a 1-channel depth map in [0, 1].

    Levels 2-4 are bilinearly upsampled to level-1 resolution, concatenated,
    passed through conv3x3 -> conv1x1 -> sigmoid, then upsampled to the
    requested output size.
    """

    def __init__(self, channels, hidden: int = 64):
        super().__init__()
        self.conv1 = nn.Conv2d(sum(channels), hidden, 3, padding=1)
        self.conv2 = nn.Conv2d(hidden, 1, 1)

    def forward(self, depth_aware, target_size) -> torch.Tensor:
        depth_aware = require_levels(depth_aware)
        if isinstance(target_size, int):
            target_size = (target_size, target_size)
        base = depth_aware[0].shape[-2:]
        stack = [depth_aware[0]] + [
            F.interpolate(f, size=base, mode="bilinear", align_corners=False)
            for f in depth_aware[1:]
        ]
        d = torch.sigmoid(self.conv2(self.conv1(torch.cat(stack, dim=1))))
        return F.interpolate(d, size=target_size, mode="bilinear",
                             align_corners=False)
