"""Dataset ingestion and augmentation.

Directory convention: a dataset root holds `rgb/`, and depending on kind
also `depth/` and `gt/`, with matching file stems. Depth maps may be 8- or
16-bit grayscale and are min-max normalized per image; ground truth is
binarized at 0.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image, UnidentifiedImageError

from .core import ImagePlane
from .errors import (EmptyDataset, MissingSubdir, StemMismatch,
                     UnreadableImage, UnsupportedBitDepth)

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp")

KIND_SUBDIRS = {
    "labeled_rgbd": ("rgb", "depth", "gt"),
    "unlabeled_rgb": ("rgb",),
    "unlabeled_rgb_with_pseudo_depth": ("rgb", "depth"),
}


class SampleEntry(NamedTuple):
    stem: str
    rgb: Path
    depth: Optional[Path] = None
    gt: Optional[Path] = None


@dataclass
class DatasetIndex:
    root: Path
    kind: str
    samples: list

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]


def _list_stems(subdir: Path) -> dict:
    files = {}
    for p in sorted(subdir.iterdir()):
        if p.suffix.lower() in IMAGE_EXTS:
            files[p.stem] = p
    return files


def scan_dataset(root, kind: str) -> DatasetIndex:
    """Index a dataset directory; stems must agree across subdirectories."""
    if kind not in KIND_SUBDIRS:
        raise ValueError(f"unknown dataset kind: {kind!r}")
    root = Path(root)
    subdirs = KIND_SUBDIRS[kind]
    stem_maps = {}
    for name in subdirs:
        sub = root / name
        if not sub.is_dir():
            raise MissingSubdir(f"{root} lacks required subdirectory {name}/")
        stem_maps[name] = _list_stems(sub)

    stem_sets = {name: set(m) for name, m in stem_maps.items()}
    union = set.union(*stem_sets.values())
    common = set.intersection(*stem_sets.values())
    if union != common:
        raise StemMismatch(sorted(union - common))

    samples = [
        SampleEntry(stem=stem,
                    rgb=stem_maps["rgb"][stem],
                    depth=stem_maps["depth"][stem] if "depth" in stem_maps else None,
                    gt=stem_maps["gt"][stem] if "gt" in stem_maps else None)
        for stem in sorted(common)
    ]
    return DatasetIndex(root=root, kind=kind, samples=samples)


def _open_image(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
        return img
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise UnreadableImage(path, str(exc)) from exc


def load_rgb(path) -> torch.Tensor:
    img = _open_image(path)
    if img.mode != "RGB":
        raise UnsupportedBitDepth(
            f"{path}: expected 8-bit RGB, got mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.float32) / 255.0          # [H, W, 3]
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def load_depth(path) -> torch.Tensor:
    """8- or 16-bit grayscale, min-max normalized per image.

    A constant image maps to all zeros (degenerate range).
    """
    img = _open_image(path)
    if img.mode == "L":
        arr = np.asarray(img, dtype=np.float32)
    elif img.mode in ("I", "I;16"):
        arr = np.asarray(img, dtype=np.int64).astype(np.float32)
    else:
        raise UnsupportedBitDepth(
            f"{path}: expected 8/16-bit grayscale depth, got mode {img.mode!r}")
    lo, hi = float(arr.min()), float(arr.max())
    if hi > lo:
        arr = (arr - lo) / (hi - lo)
    else:
        arr = np.zeros_like(arr)
    return torch.from_numpy(arr).unsqueeze(0).contiguous()


def load_gt(path) -> torch.Tensor:
    img = _open_image(path)
    if img.mode == "1":
        img = img.convert("L")
    if img.mode != "L":
        raise UnsupportedBitDepth(
            f"{path}: expected 8-bit grayscale mask, got mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.float32) / 255.0
    return (torch.from_numpy(arr).unsqueeze(0) >= 0.5).float()


def _resize(x: torch.Tensor, size, mode: str) -> torch.Tensor:
    if x.shape[-2:] == tuple(size):
        return x
    batched = x.unsqueeze(0)
    if mode == "nearest":
        out = F.interpolate(batched, size=size, mode="nearest")
    else:
        out = F.interpolate(batched, size=size, mode="bilinear",
                            align_corners=False)
    return out.squeeze(0)


def load_sample(entry: SampleEntry, size=None) -> dict:
    """Decode one entry into ImagePlanes, optionally resized to `size`."""
    if isinstance(size, int):
        size = (size, size)
    rgb = load_rgb(entry.rgb)
    depth = load_depth(entry.depth) if entry.depth is not None else None
    gt = load_gt(entry.gt) if entry.gt is not None else None
    if size is not None:
        rgb = _resize(rgb, size, "bilinear")
        if depth is not None:
            depth = _resize(depth, size, "bilinear")
        if gt is not None:
            gt = _resize(gt, size, "nearest")
    out = {"rgb": ImagePlane(rgb, "rgb")}
    if depth is not None:
        out["depth"] = ImagePlane(depth.clamp(0, 1), "depth")
    if gt is not None:
        out["gt"] = ImagePlane(gt, "mask")
    return out


def _rotate(x: torch.Tensor, angle_deg: float, mode: str) -> torch.Tensor:
    """Rotate [C, H, W] about the center with reflection padding."""
    rad = math.radians(angle_deg)
    cos, sin = math.cos(rad), math.sin(rad)
    theta = torch.tensor([[cos, -sin, 0.0], [sin, cos, 0.0]],
                         dtype=x.dtype).unsqueeze(0)
    batched = x.unsqueeze(0)
    grid = F.affine_grid(theta, batched.shape, align_corners=False)
    return F.grid_sample(batched, grid, mode=mode, padding_mode="reflection",
                         align_corners=False).squeeze(0)


def augment(rgb, depth, gt, seed: int, size=None, rotation_degrees: float = 10.0,
            flip_prob: float = 0.5):
    """One shared geometric draw applied to all three planes.

    Rotation (bilinear for rgb/depth, nearest for the mask, reflect-padded),
    then resize to `size` if given, then horizontal flip with probability
    flip_prob. Deterministic given the seed; masks stay binary.
    """
    rng = np.random.default_rng(seed)
    angle = float(rng.uniform(-rotation_degrees, rotation_degrees))
    do_flip = bool(rng.random() < flip_prob)
    if isinstance(size, int):
        size = (size, size)

    def _apply(x, mode):
        if x is None:
            return None
        if rotation_degrees > 0:
            x = _rotate(x, angle, mode)
        if size is not None:
            x = _resize(x, size, mode)
        if do_flip:
            x = torch.flip(x, dims=[-1])
        return x

    rgb = _apply(rgb, "bilinear").clamp(0, 1)
    depth = _apply(depth, "bilinear")
    depth = depth.clamp(0, 1) if depth is not None else None
    gt = _apply(gt, "nearest")
    return rgb, depth, gt


class InMemoryDataset:
    """Desk-scale dataset: decodes everything once, serves tensors.

    Samples are stored at their native resolution; `fetch` applies the
    shared augmentation (or a plain resize) and returns batched tensors.
    """

    def __init__(self, index: DatasetIndex, input_size: int):
        if len(index) == 0:
            raise EmptyDataset(f"no samples under {index.root} ({index.kind})")
        self.index = index
        self.input_size = (input_size, input_size) if isinstance(input_size, int) else tuple(input_size)
        self.stems = [e.stem for e in index]
        self.raw = []
        for entry in index:
            planes = load_sample(entry)
            self.raw.append((
                planes["rgb"].data,
                planes["depth"].data if "depth" in planes else None,
                planes["gt"].data if "gt" in planes else None,
            ))

    def __len__(self):
        return len(self.raw)

    def fetch(self, indices, seed=None, augment_cfg=None):
        """Stack samples; augment when a config dict is given."""
        rgbs, depths, gts = [], [], []
        for slot, i in enumerate(indices):
            rgb, depth, gt = self.raw[i]
            if augment_cfg is not None:
                rgb, depth, gt = augment(
                    rgb, depth, gt, seed=(seed or 0) * 131 + slot,
                    size=self.input_size,
                    rotation_degrees=augment_cfg.get("rotation_degrees", 10.0),
                    flip_prob=augment_cfg.get("flip_prob", 0.5))
            else:
                rgb = _resize(rgb, self.input_size, "bilinear")
                depth = _resize(depth, self.input_size, "bilinear") if depth is not None else None
                gt = _resize(gt, self.input_size, "nearest") if gt is not None else None
            rgbs.append(rgb)
            depths.append(depth)
            gts.append(gt)
        batch = {"rgb": torch.stack(rgbs)}
        if depths[0] is not None:
            batch["depth"] = torch.stack(depths)
        if gts[0] is not None:
            batch["gt"] = torch.stack(gts)
        return batch


class PoolCycler:
    """Infinite index stream over one pool, reshuffled each epoch."""

    def __init__(self, n: int, seed: int):
        if n <= 0:
            raise EmptyDataset("cannot cycle an empty pool")
        self.n = n
        self.rng = np.random.default_rng(seed)
        self._order = []

    def take(self, k: int) -> list:
        out = []
        while len(out) < k:
            if not self._order:
                self._order = list(self.rng.permutation(self.n))
            out.append(int(self._order.pop(0)))
        return out
