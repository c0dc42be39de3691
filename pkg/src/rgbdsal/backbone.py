"""Feature pyramid encoders.

Ships a tiny from-scratch encoder that trains on CPU in minutes and a
registry seam so pretrained encoders can be plugged in by name. RGB and
depth use two independent encoder instances; a 1-channel depth map is
replicated to 3 channels when the encoder expects RGB-like input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .core import FeaturePyramid
from .errors import UnknownEncoder
from .layers import make_norm


@dataclass(frozen=True)
class EncoderSpec:
    name: str = "tiny"
    channels_per_level: tuple = (16, 32, 64, 128)
    pretrained: bool = False
    norm: str = "group"
    # Optional 1x1 projections mapping every level to one width (0 = keep
    # each level's native width).
    common_width: int = 0

    def __post_init__(self):
        if len(self.channels_per_level) != 4:
            raise ValueError("channels_per_level must have exactly 4 entries")


_ENCODERS = {}


def register_encoder(name):
    """Class decorator adding a constructor to the registry."""

    def deco(builder):
        _ENCODERS[name] = builder
        return builder

    return deco


def build_encoder(spec: EncoderSpec) -> nn.Module:
    if spec.name not in _ENCODERS:
        raise UnknownEncoder(spec.name)
    encoder = _ENCODERS[spec.name](spec)
    if spec.common_width:
        encoder = WidthAdapter(encoder, spec.common_width)
    return encoder


@register_encoder("tiny")
class TinyEncoder(nn.Module):
    """Stride-2 stem plus four [conv3x3 -> norm -> ReLU -> conv3x3 s2] stages.

    Returns the 4 stage outputs: /4, /8, /16, /32 of the input resolution.
    """

    def __init__(self, spec: EncoderSpec):
        super().__init__()
        chans = spec.channels_per_level
        self.in_channels = 3
        self.channels = tuple(chans)
        self.stem = nn.Sequential(
            nn.Conv2d(3, chans[0], 3, stride=2, padding=1),
            make_norm(spec.norm, chans[0]),
            nn.ReLU(inplace=True),
        )
        stages = []
        prev = chans[0]
        for c in chans:
            stages.append(nn.Sequential(
                nn.Conv2d(prev, c, 3, padding=1),
                make_norm(spec.norm, c),
                nn.ReLU(inplace=True),
                nn.Conv2d(c, c, 3, stride=2, padding=1),
            ))
            prev = c
        self.stages = nn.ModuleList(stages)

    def forward(self, x):
        x = self.stem(x)
        levels = []
        for stage in self.stages:
            x = stage(x)
            levels.append(x)
        return levels


class WidthAdapter(nn.Module):
    """Wraps an encoder with per-level 1x1 projections to a common width."""

    def __init__(self, encoder: nn.Module, width: int):
        super().__init__()
        self.encoder = encoder
        self.in_channels = encoder.in_channels
        self.channels = (width,) * len(encoder.channels)
        self.proj = nn.ModuleList(
            nn.Conv2d(c, width, 1) for c in encoder.channels)

    def forward(self, x):
        return [p(f) for p, f in zip(self.proj, self.encoder(x))]


def _adapt_channels(encoder: nn.Module, x: torch.Tensor) -> torch.Tensor:
    if x.shape[1] == 1 and encoder.in_channels == 3:
        return x.repeat(1, 3, 1, 1)
    return x


def encode_rgb(encoder: nn.Module, rgb: torch.Tensor) -> FeaturePyramid:
    """rgb: [B, 3, H, W] in [0, 1]."""
    return FeaturePyramid(levels=encoder(rgb), source="rgb_encoder")


def encode_depth(encoder: nn.Module, depth: torch.Tensor) -> FeaturePyramid:
    """depth: [B, 1, H, W] in [0, 1]; replicated to 3 channels if needed."""
    return FeaturePyramid(levels=encoder(_adapt_channels(encoder, depth)),
                          source="depth_encoder")
