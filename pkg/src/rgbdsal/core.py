"""Shared tensor-role containers and shape contracts.

Layout is channels-first everywhere: single images are [C, H, W], batches
are [B, C, H, W]. Pyramids hold 4 levels at 1/4, 1/8, 1/16, 1/32 of the
input resolution.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import MissingLevel, OutOfRange, ShapeMismatch

PLANE_KINDS = ("rgb", "depth", "saliency", "mask")
_KIND_CHANNELS = {"rgb": 3, "depth": 1, "saliency": 1, "mask": 1}

PYRAMID_LEVELS = 4
# Level i (1-based) sits at input/(4 * 2^(i-1)): /4, /8, /16, /32.
LEVEL_STRIDES = tuple(4 * 2 ** i for i in range(PYRAMID_LEVELS))


@dataclass
class ImagePlane:
    """A single image tensor with a declared role and checked value range."""

    data: torch.Tensor
    kind: str

    def __post_init__(self):
        if self.kind not in _KIND_CHANNELS:
            raise ValueError(f"unknown plane kind: {self.kind!r}")
        if not isinstance(self.data, torch.Tensor):
            self.data = torch.as_tensor(self.data)
        if self.data.dim() != 3:
            raise ShapeMismatch("plane must be rank 3 [C, H, W]",
                                actual=tuple(self.data.shape))
        want = _KIND_CHANNELS[self.kind]
        if self.data.shape[0] != want:
            raise ShapeMismatch(f"kind {self.kind!r} wants {want} channel(s)",
                                expected=want, actual=int(self.data.shape[0]))
        if not torch.is_floating_point(self.data):
            raise OutOfRange(f"{self.kind} plane must be float, got {self.data.dtype}")
        if self.data.numel():
            lo = float(self.data.min())
            hi = float(self.data.max())
            if lo < 0.0 or hi > 1.0:
                raise OutOfRange(
                    f"{self.kind} plane outside [0, 1]: min={lo:.6g} max={hi:.6g}")
            if self.kind == "mask":
                binary = (self.data == 0) | (self.data == 1)
                if not bool(binary.all()):
                    raise OutOfRange("mask plane must contain only 0 and 1")

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])


@dataclass
class FeaturePyramid:
    """Ordered 4-level feature stack from one encoder."""

    levels: list
    source: str = "rgb_encoder"  # rgb_encoder | depth_encoder

    def __post_init__(self):
        if self.source not in ("rgb_encoder", "depth_encoder"):
            raise ValueError(f"unknown pyramid source: {self.source!r}")

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def __getitem__(self, i):
        return self.levels[i]


@dataclass
class PredictionPair:
    """Final saliency map plus the predicted depth map, both at input size."""

    saliency: ImagePlane
    depth: ImagePlane | None = None


def validate_pyramid(p: FeaturePyramid, input_size) -> None:
    """Check level count, scale contract, and batch consistency.

    input_size is (H, W) or a single int for square inputs.
    """
    if isinstance(input_size, int):
        input_size = (input_size, input_size)
    h, w = input_size
    if len(p.levels) != PYRAMID_LEVELS:
        raise ShapeMismatch(f"pyramid must have {PYRAMID_LEVELS} levels",
                            expected=PYRAMID_LEVELS, actual=len(p.levels))
    batch = None
    for i, (lvl, stride) in enumerate(zip(p.levels, LEVEL_STRIDES), start=1):
        if lvl.dim() != 4:
            raise ShapeMismatch("pyramid level must be rank 4", level=i,
                                actual=tuple(lvl.shape))
        want = (h // stride, w // stride)
        got = (int(lvl.shape[2]), int(lvl.shape[3]))
        if got != want:
            raise ShapeMismatch("level spatial size off contract", level=i,
                                expected=want, actual=got)
        if batch is None:
            batch = int(lvl.shape[0])
        elif int(lvl.shape[0]) != batch:
            raise ShapeMismatch("batch size varies across levels", level=i,
                                expected=batch, actual=int(lvl.shape[0]))


def require_levels(levels, n=PYRAMID_LEVELS):
    if len(levels) != n:
        raise MissingLevel(f"expected {n} levels, got {len(levels)}")
    return levels


def seed_all(seed: int) -> None:
    """Seed python, numpy, and torch RNGs and request deterministic kernels."""
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    os.environ.setdefault("CUBLAS_WORKSPACE_CONFIG", ":4096:8")
    try:
        torch.use_deterministic_algorithms(True)
    except RuntimeError:
        pass
