"""Saliency and depth evaluation measures plus directory-level reporting.

S-measure and E-measure follow their published reference algorithms
(structure measure: object/region split around the GT centroid; enhanced
alignment: bias-correlation map). F-measure sweeps 256 uniform thresholds
with beta^2 = 0.3. Thresholded metrics min-max normalize the prediction
first unless its range is degenerate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (EmptyGroundTruth, NoValidPixels, ShapeMismatch,
                     StemMismatch)

_EPS = np.finfo(np.float64).eps
DEFAULT_THRESHOLDS = 256


def _as_2d(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D", actual=arr.shape)
    return arr


def _paired(p, g):
    p = _as_2d(p, "prediction")
    g = _as_2d(g, "ground truth")
    if p.shape != g.shape:
        raise ShapeMismatch("prediction/gt size differs",
                            expected=g.shape, actual=p.shape)
    return p, g > 0.5


def _normalize_for_thresholding(p):
    lo, hi = p.min(), p.max()
    if hi - lo <= 0:
        return p
    return (p - lo) / (hi - lo)


def mae(pred, gt) -> float:
    p, g = _paired(pred, gt)
    return float(np.abs(p - g.astype(np.float64)).mean())


def f_measure_max(pred, gt, beta_sq: float = 0.3,
                  thresholds: int = DEFAULT_THRESHOLDS) -> float:
    p, g = _paired(pred, gt)
    n_pos = g.sum()
    if n_pos == 0:
        raise EmptyGroundTruth("f-measure needs at least one positive gt pixel")
    p = _normalize_for_thresholding(p)
    best = 0.0
    for tau in np.linspace(0.0, 1.0, thresholds):
        binarized = p >= tau
        n_pred = binarized.sum()
        if n_pred == 0:
            continue  # F defined as 0 here
        tp = np.logical_and(binarized, g).sum()
        precision = tp / n_pred
        recall = tp / n_pos
        denom = beta_sq * precision + recall
        if denom > 0:
            f = (1.0 + beta_sq) * precision * recall / denom
            best = max(best, float(f))
    return best


# --- structure measure -----------------------------------------------------

def _object_score(values) -> float:
    if values.size == 0:
        return 0.0
    x = values.mean()
    sigma = values.std(ddof=1) if values.size > 1 else 0.0
    return float(2.0 * x / (x * x + 1.0 + sigma + _EPS))


def _s_object(p, g) -> float:
    fg = _object_score(p[g])
    bg = _object_score((1.0 - p)[~g])
    u = g.mean()
    return float(u * fg + (1.0 - u) * bg)


def _round_half_away(v: float) -> int:
    return int(np.floor(v + 0.5))


def _centroid(g) -> tuple:
    """1-based (col, row) of the foreground centroid, rounded half-away."""
    rows, cols = g.shape
    total = g.sum()
    if total == 0:
        return _round_half_away(cols / 2.0), _round_half_away(rows / 2.0)
    cols_idx = np.arange(1, cols + 1, dtype=np.float64)
    rows_idx = np.arange(1, rows + 1, dtype=np.float64)
    x = _round_half_away(float((g.sum(axis=0) * cols_idx).sum() / total))
    y = _round_half_away(float((g.sum(axis=1) * rows_idx).sum() / total))
    return x, y


def _region_ssim(p_q, g_q) -> float:
    n = p_q.size
    if n == 0:
        return 0.0
    x = p_q.mean()
    y = g_q.mean()
    sigma_x2 = ((p_q - x) ** 2).sum() / (n - 1 + _EPS)
    sigma_y2 = ((g_q - y) ** 2).sum() / (n - 1 + _EPS)
    sigma_xy = ((p_q - x) * (g_q - y)).sum() / (n - 1 + _EPS)
    num = 4.0 * x * y * sigma_xy
    den = (x * x + y * y) * (sigma_x2 + sigma_y2)
    if num != 0.0:
        return float(num / (den + _EPS))
    if den == 0.0:
        return 1.0
    return 0.0


def _s_region(p, g) -> float:
    rows, cols = g.shape
    x, y = _centroid(g)
    area = rows * cols
    gf = g.astype(np.float64)
    quads_p = (p[:y, :x], p[:y, x:], p[y:, :x], p[y:, x:])
    quads_g = (gf[:y, :x], gf[:y, x:], gf[y:, :x], gf[y:, x:])
    w1 = (x * y) / area
    w2 = ((cols - x) * y) / area
    w3 = ((rows - y) * x) / area
    w4 = 1.0 - w1 - w2 - w3
    weights = (w1, w2, w3, w4)
    return float(sum(w * _region_ssim(pq, gq)
                     for w, pq, gq in zip(weights, quads_p, quads_g)))


def s_measure(pred, gt, balance: float = 0.5) -> float:
    p, g = _paired(pred, gt)
    y = g.mean()
    if y == 0.0:  # all-background gt: reward empty predictions
        return float(1.0 - p.mean())
    if y == 1.0:
        return float(p.mean())
    score = balance * _s_object(p, g) + (1.0 - balance) * _s_region(p, g)
    return float(max(score, 0.0))


# --- enhanced alignment ----------------------------------------------------

def _enhanced_alignment(binarized, g) -> float:
    fm = binarized.astype(np.float64)
    gf = g.astype(np.float64)
    n = fm.size
    if gf.sum() == 0:
        enhanced = 1.0 - fm
    elif (1.0 - gf).sum() == 0:
        enhanced = fm
    else:
        align_f = fm - fm.mean()
        align_g = gf - gf.mean()
        align = 2.0 * align_g * align_f / (align_g ** 2 + align_f ** 2 + _EPS)
        enhanced = (align + 1.0) ** 2 / 4.0
    # the reference's N-1 normalization pushes perfect maps slightly above 1
    # on small images; cap so the score stays in [0, 1]
    return float(min(enhanced.sum() / (n - 1 + _EPS), 1.0))


def e_measure_max(pred, gt, thresholds: int = DEFAULT_THRESHOLDS) -> float:
    p, g = _paired(pred, gt)
    p = _normalize_for_thresholding(p)
    return max(_enhanced_alignment(p >= tau, g)
               for tau in np.linspace(0.0, 1.0, thresholds))


# --- depth ------------------------------------------------------------------

class DepthMetrics(NamedTuple):
    mae: float
    rmse: float
    imae: float
    irmse: float


def depth_metrics(pred, gt, valid_mask=None) -> DepthMetrics:
    """Error metrics in the arrays' native units over the valid mask.

    The caller's mask must exclude zero/invalid depths; inverse metrics
    divide by the raw values.
    """
    p = _as_2d(pred, "depth prediction")
    g = _as_2d(gt, "depth ground truth")
    if p.shape != g.shape:
        raise ShapeMismatch("depth size differs", expected=g.shape, actual=p.shape)
    if valid_mask is None:
        valid = np.ones_like(g, dtype=bool)
    else:
        valid = np.asarray(valid_mask, dtype=bool)
        if valid.shape != g.shape:
            raise ShapeMismatch("valid mask size differs",
                                expected=g.shape, actual=valid.shape)
    if not valid.any():
        raise NoValidPixels("depth metric mask excludes every pixel")
    pv, gv = p[valid], g[valid]
    diff = pv - gv
    inv_diff = 1.0 / pv - 1.0 / gv
    return DepthMetrics(
        mae=float(np.abs(diff).mean()),
        rmse=float(np.sqrt((diff ** 2).mean())),
        imae=float(np.abs(inv_diff).mean()),
        irmse=float(np.sqrt((inv_diff ** 2).mean())),
    )


# --- directory evaluation ----------------------------------------------------

@dataclass
class EvalReport:
    rows: list          # dicts: stem, s_measure, f_max, e_max, mae
    means: dict
    table: str

    def __str__(self):
        return self.table


def _load_gray(path) -> np.ndarray:
    from PIL import Image
    img = Image.open(path)
    img.load()
    arr = np.asarray(img.convert("L"), dtype=np.float64)
    return arr / 255.0


def _resize_pred(pred, shape) -> np.ndarray:
    if pred.shape == shape:
        return pred
    import torch
    import torch.nn.functional as F
    t = torch.from_numpy(pred)[None, None]
    out = F.interpolate(t, size=shape, mode="bilinear", align_corners=False)
    return out[0, 0].numpy()


def evaluate_dir(pred_dir, gt_dir, out_csv=None) -> EvalReport:
    """Per-image saliency metrics plus dataset means over matched stems."""
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    preds = {p.stem: p for p in sorted(pred_dir.iterdir())
             if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp")}
    gts = {p.stem: p for p in sorted(gt_dir.iterdir())
           if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp")}
    if set(preds) != set(gts):
        raise StemMismatch(sorted(set(preds) ^ set(gts)))

    rows = []
    for stem in sorted(preds):
        gt = _load_gray(gts[stem])
        pred = _resize_pred(_load_gray(preds[stem]), gt.shape)
        rows.append({
            "stem": stem,
            "s_measure": s_measure(pred, gt),
            "f_max": f_measure_max(pred, gt),
            "e_max": e_measure_max(pred, gt),
            "mae": mae(pred, gt),
        })

    keys = ("s_measure", "f_max", "e_max", "mae")
    means = {k: float(np.mean([r[k] for r in rows])) if rows else float("nan")
             for k in keys}

    header = f"{'stem':<20s}" + "".join(f"{k:>12s}" for k in keys)
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(f"{r['stem']:<20s}" +
                     "".join(f"{r[k]:>12.4f}" for k in keys))
    lines.append("-" * len(header))
    lines.append(f"{'mean':<20s}" + "".join(f"{means[k]:>12.4f}" for k in keys))
    table = "\n".join(lines)

    if out_csv is not None:
        out_csv = Path(out_csv)
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["stem"] + list(keys))
            for r in rows:
                writer.writerow([r["stem"]] + [f"{r[k]:.6f}" for k in keys])
            writer.writerow(["mean"] + [f"{means[k]:.6f}" for k in keys])
    return EvalReport(rows=rows, means=means, table=table)
