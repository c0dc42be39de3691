"""Synthetic layered-shape scenes for desk-scale training and tests.

Each scene stacks 2-4 flat-colored shapes (circle, rectangle, triangle) over
a gradient background. Depth is constant per layer with nearer shapes
brighter; the ground truth is the nearest shape's visible region, which is
painted last and therefore unoccluded. Generation is deterministic per seed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import IoError

BACKGROUND_DEPTH = 0.05


def _shape_mask(rng, size: int) -> np.ndarray:
    """Random circle/rectangle/triangle mask with at least a few pixels."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    kind = rng.choice(["circle", "rect", "triangle"])
    cx = rng.uniform(0.25, 0.75) * size
    cy = rng.uniform(0.25, 0.75) * size
    r = rng.uniform(0.14, 0.30) * size
    if kind == "circle":
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= r ** 2
    if kind == "rect":
        w = rng.uniform(0.7, 1.4) * r
        return (np.abs(xx - cx) <= w) & (np.abs(yy - cy) <= r)
    # Isosceles triangle pointing up, apex at cy - r.
    rel_y = yy - (cy - r)
    half_width = rel_y / 2.0
    return (rel_y >= 0) & (yy <= cy + r) & (np.abs(xx - cx) <= half_width)


def _render_scene(rng, size: int):
    """Returns (rgb [H,W,3] float, depth [H,W] float, gt [H,W] bool)."""
    yy = np.linspace(0.0, 1.0, size)[:, None]
    c0 = rng.uniform(0.0, 0.35, size=3)
    c1 = rng.uniform(0.0, 0.35, size=3)
    rgb = c0[None, None, :] + (c1 - c0)[None, None, :] * yy[:, :, None]
    rgb = rgb + rng.normal(0.0, 0.015, size=(size, size, 3))
    depth = np.full((size, size), BACKGROUND_DEPTH)

    n_shapes = int(rng.integers(2, 5))
    layer_depths = np.sort(rng.uniform(0.25, 0.95, size=n_shapes))
    gt = None
    for layer_depth in layer_depths:  # far to near; nearest painted last
        mask = _shape_mask(rng, size)
        while not mask.any():
            mask = _shape_mask(rng, size)
        color = rng.uniform(0.45, 1.0, size=3)
        rgb[mask] = color + rng.normal(0.0, 0.01, size=3)
        depth[mask] = layer_depth
        gt = mask
    rgb = np.clip(rgb, 0.0, 1.0)
    return rgb, depth, gt


def _scene_with_valid_gt(rng, size: int):
    rgb, depth, gt = _render_scene(rng, size)
    while not (gt.any() and (~gt).any()):
        rgb, depth, gt = _render_scene(rng, size)
    return rgb, depth, gt


def _write_png(path: Path, arr: np.ndarray) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(arr).save(path)
    except OSError as exc:
        raise IoError(f"failed to write {path}: {exc}") from exc


def make_toy_data(out_dir, n_labeled: int, n_unlabeled: int, seed: int = 0,
                  size: int = 64) -> dict:
    """Write a labeled split (rgb/depth/gt) and an unlabeled split (rgb only).

    Layout: <out_dir>/labeled/{rgb,depth,gt}/img_NNNN.png and
    <out_dir>/unlabeled/rgb/img_NNNN.png. Returns the written counts.
    """
    out = Path(out_dir)
    for i in range(n_labeled + n_unlabeled):
        rng = np.random.default_rng([seed, i])
        rgb, depth, gt = _scene_with_valid_gt(rng, size)
        rgb8 = (rgb * 255.0).round().astype(np.uint8)
        name = f"img_{i:04d}.png"
        if i < n_labeled:
            depth16 = (depth * 65535.0).round().astype(np.uint16)
            gt8 = (gt.astype(np.uint8)) * 255
            _write_png(out / "labeled" / "rgb" / name, rgb8)
            _write_png(out / "labeled" / "depth" / name, depth16)
            _write_png(out / "labeled" / "gt" / name, gt8)
        else:
            _write_png(out / "unlabeled" / "rgb" / name, rgb8)
    return {"labeled": n_labeled, "unlabeled": n_unlabeled}
