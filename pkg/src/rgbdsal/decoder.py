"""Coarse-to-fine saliency decoder with atrous-pyramid refinement."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import require_levels
from .errors import InputTooSmall, ShapeMismatch


class AtrousPyramid(nn.Module):
    """Four parallel dilated 3x3 convs over the same input, concatenated,
    fused by a 1x1 conv. Spatial size preserved."""

    def __init__(self, channels: int, rates=(1, 6, 12, 18)):
        super().__init__()
        self.rates = tuple(rates)
        self.branches = nn.ModuleList(
            nn.Conv2d(channels, channels, 3, padding=r, dilation=r)
            for r in self.rates)
        self.fuse = nn.Conv2d(len(self.rates) * channels, channels, 1)

    def forward(self, x):
        h, w = x.shape[-2:]
        if h < 3 or w < 3:
            raise InputTooSmall(f"atrous pyramid needs >= 3x3 input, got {h}x{w}")
        return self.fuse(torch.cat([b(x) for b in self.branches], dim=1))


class SaliencyDecoder(nn.Module):
    """Project fused levels to a common width, then fold coarse-to-fine.

    Each fold refines the finer level with the atrous pyramid and merges in
    the bilinearly upsampled coarser stream (element-wise add by default,
    concat + 1x1 behind merge="concat"). The head is conv3x3 -> conv1x1 ->
    sigmoid, upsampled to the target size.

    Fine maps smaller than 3x3 (inputs below 96px) skip the atrous
    refinement so any input divisible by 32 decodes.
    """

    def __init__(self, in_channels, width: int = 64, merge: str = "add",
                 rates=(1, 6, 12, 18)):
        super().__init__()
        if merge not in ("add", "concat"):
            raise ValueError(f"decoder.merge must be add|concat, got {merge!r}")
        self.merge = merge
        self.width = width
        self.proj = nn.ModuleList(nn.Conv2d(c, width, 1) for c in in_channels)
        self.refine = nn.ModuleList(
            AtrousPyramid(width, rates) for _ in range(len(in_channels) - 1))
        if merge == "concat":
            self.fold = nn.ModuleList(
                nn.Conv2d(2 * width, width, 1)
                for _ in range(len(in_channels) - 1))
        self.head = nn.Sequential(
            nn.Conv2d(width, width, 3, padding=1),
            nn.Conv2d(width, 1, 1),
        )

    def merge_adjacent(self, f_fine, f_coarse, level: int):
        """Merge one pyramid step: refined fine + upsampled coarse."""
        fh, fw = f_fine.shape[-2:]
        ch, cw = f_coarse.shape[-2:]
        if (ch * 2, cw * 2) != (fh, fw):
            raise ShapeMismatch("coarse level must be at half the fine size",
                                level=level, expected=(fh // 2, fw // 2),
                                actual=(ch, cw))
        up = F.interpolate(f_coarse, size=(fh, fw), mode="bilinear",
                           align_corners=False)
        refined = self.refine[level](f_fine) if min(fh, fw) >= 3 else f_fine
        if self.merge == "add":
            return refined + up
        return self.fold[level](torch.cat([refined, up], dim=1))

    def forward(self, fused_levels, target_size):
        fused_levels = require_levels(fused_levels, len(self.proj))
        if isinstance(target_size, int):
            target_size = (target_size, target_size)
        feats = [p(f) for p, f in zip(self.proj, fused_levels)]
        merged = feats[-1]
        for i in range(len(feats) - 2, -1, -1):
            merged = self.merge_adjacent(feats[i], merged, i)
        sal = torch.sigmoid(self.head(merged))
        return F.interpolate(sal, size=target_size, mode="bilinear",
                             align_corners=False)
