"""Training stages, optimization schedule, checkpointing, and inference.

Stage 1 pretrains the depth branch on labeled pairs (depth MSE only).
Stage 2 runs the trained branch over the unlabeled pool to write pseudo
depth maps. Stage 3 trains the whole network with the mean-teacher
objective on labeled + unlabeled batches; the supervised-only variant is
the same loop with an empty unlabeled set.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .core import ImagePlane, PredictionPair, seed_all
from .data import (IMAGE_EXTS, InMemoryDataset, PoolCycler, load_depth,
                   load_rgb, scan_dataset)
from .errors import (EmptyDataset, MissingCheckpoint, OutOfRange,
                     RgbdSalError)
from .losses import LossWeights, consistency_loss, supervised_loss, total_loss
from .mean_teacher import ema_update, make_teacher, paired_forward
from .model import DepthSaliencyNet, ModelConfig, build_model

CHECKPOINT_FORMAT_VERSION = 1

STAGES = ("depth_pretrain", "pseudo_depth", "semi", "supervised_only")

# Weights loaded from a stage-1 checkpoint into the stage-3 model.
DEPTH_BRANCH_PREFIXES = ("rgb_encoder", "decoupler", "depth_head")


@dataclass
class RunConfig:
    stage: str = "semi"
    batch_labeled: int = 4
    batch_unlabeled: int = 4
    max_iter: int = 20000
    lr0: float = 0.001
    poly_power: float = 0.9
    momentum: float = 0.9
    weight_decay: float = 0.0005
    seed: int = 0
    device: str = "cpu"
    input_size: int = 256
    ema_decay: float = 0.99
    jitter: float = 0.4
    teacher_perturb: str = "jitter"  # jitter | clean
    augment: bool = True
    rotation_degrees: float = 10.0
    flip_prob: float = 0.5
    init: str = "stage1"  # stage1 | scratch (scratch realizes the no-pretrain row)
    log_every: int = 0
    loss: LossWeights = field(default_factory=LossWeights)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"stage must be one of {STAGES}, got {self.stage!r}")
        if self.batch_labeled < 1:
            raise ValueError("batch_labeled must be >= 1")
        if self.stage == "semi" and self.batch_unlabeled < 1:
            raise ValueError("semi stage needs batch_unlabeled >= 1")
        if self.init not in ("stage1", "scratch"):
            raise ValueError("init must be stage1|scratch")


@dataclass
class TrainResult:
    model: DepthSaliencyNet
    trace: list
    checkpoint: Path | None = None
    teacher: DepthSaliencyNet | None = None


def poly_lr(t: float, t_max: float, lr0: float = 0.001,
            power: float = 0.9) -> float:
    """lr0 * (1 - t/t_max)^power."""
    if t_max <= 0:
        raise OutOfRange(f"t_max must be positive, got {t_max}")
    if not 0 <= t <= t_max:
        raise OutOfRange(f"t={t} outside [0, {t_max}]")
    return lr0 * (1.0 - t / t_max) ** power


def build_optimizer(model: torch.nn.Module, cfg: RunConfig) -> torch.optim.SGD:
    """SGD with momentum; weight decay only on rank>=2 weights (biases and
    normalization scales are excluded)."""
    decay, no_decay = [], []
    for p in model.parameters():
        if not p.requires_grad:
            continue
        (decay if p.ndim > 1 else no_decay).append(p)
    groups = [
        {"params": decay, "weight_decay": cfg.weight_decay, "name": "decay"},
        {"params": no_decay, "weight_decay": 0.0, "name": "no_decay"},
    ]
    return torch.optim.SGD(groups, lr=cfg.lr0, momentum=cfg.momentum)


def set_lr(optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


# --- checkpoints -------------------------------------------------------------

def save_checkpoint(path, *, student, config: RunConfig, teacher=None,
                    optimizer=None, iteration: int = 0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": asdict(config),
        "student": student.state_dict(),
        "teacher": teacher.state_dict() if teacher is not None else None,
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "iteration": iteration,
        "rng": {
            "python": random.getstate(),
            "numpy": np.random.get_state(),
            "torch": torch.get_rng_state(),
        },
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingCheckpoint(f"no checkpoint at {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise RgbdSalError(
            f"checkpoint format {version!r} unsupported "
            f"(expected {CHECKPOINT_FORMAT_VERSION})")
    return payload


def run_config_from_snapshot(snapshot: dict) -> RunConfig:
    snap = dict(snapshot)
    loss = LossWeights(**snap.pop("loss"))
    model_snap = dict(snap.pop("model"))
    for key in ("channels", "aspp_rates", "ablations"):
        model_snap[key] = tuple(model_snap[key])
    model = ModelConfig(**model_snap)
    return RunConfig(loss=loss, model=model, **snap)


def model_from_checkpoint(path) -> tuple:
    """(model in eval mode, RunConfig) from a stored student snapshot."""
    payload = load_checkpoint(path)
    cfg = run_config_from_snapshot(payload["config"])
    model = build_model(cfg.model)
    model.load_state_dict(payload["student"])
    model.eval()
    return model, cfg


def load_depth_branch(model: DepthSaliencyNet, student_state: dict) -> int:
    """Copy stage-1 depth-branch weights into a fresh stage-3 model.

    Returns the number of tensors copied; fusion/decoder stay random.
    """
    own = model.state_dict()
    picked = {}
    for key, value in student_state.items():
        if key.split(".", 1)[0] in DEPTH_BRANCH_PREFIXES and key in own:
            picked[key] = value
    own.update(picked)
    model.load_state_dict(own)
    return len(picked)


# --- shared loop pieces -------------------------------------------------------

def _as_dataset(source, kind: str, input_size) -> InMemoryDataset:
    if isinstance(source, InMemoryDataset):
        return source
    index = source if not isinstance(source, (str, Path)) else scan_dataset(source, kind)
    return InMemoryDataset(index, input_size)


def _augment_cfg(cfg: RunConfig):
    if not cfg.augment:
        return None
    return {"rotation_degrees": cfg.rotation_degrees, "flip_prob": cfg.flip_prob}


def _iter_seed(cfg: RunConfig, t: int, salt: int) -> int:
    return (cfg.seed * 1_000_003 + t) * 7 + salt


# --- stage 1 ------------------------------------------------------------------

def train_depth(cfg: RunConfig, labeled, out_dir=None) -> TrainResult:
    """Stage 1: depth branch only, MSE against the labeled depth maps."""
    seed_all(cfg.seed)
    ds = _as_dataset(labeled, "labeled_rgbd", cfg.input_size)
    device = torch.device(cfg.device)
    model = build_model(cfg.model).to(device)
    optimizer = build_optimizer(model, cfg)
    cycler = PoolCycler(len(ds), seed=cfg.seed)
    aug = _augment_cfg(cfg)

    trace = []
    model.train()
    for t in range(cfg.max_iter):
        set_lr(optimizer, poly_lr(t, cfg.max_iter, cfg.lr0, cfg.poly_power))
        batch = ds.fetch(cycler.take(cfg.batch_labeled),
                         seed=_iter_seed(cfg, t, 1), augment_cfg=aug)
        rgb = batch["rgb"].to(device)
        gt_depth = batch["depth"].to(device)
        loss = F.mse_loss(model.forward_depth(rgb), gt_depth)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        trace.append(float(loss.detach()))
        if cfg.log_every and (t % cfg.log_every == 0 or t == cfg.max_iter - 1):
            print(f"[depth {t:6d}] mse={trace[-1]:.5f}")

    ckpt = None
    if out_dir is not None:
        ckpt = save_checkpoint(Path(out_dir) / "stage1_depth.pt", student=model,
                               config=cfg, optimizer=optimizer,
                               iteration=cfg.max_iter)
    return TrainResult(model=model, trace=trace, checkpoint=ckpt)


# --- stage 2 ------------------------------------------------------------------

def generate_pseudo_depth(checkpoint, rgb_source, out_dir) -> int:
    """Write one 16-bit pseudo-depth PNG per RGB image; returns the count.

    rgb_source is either a directory of images or a dataset root with rgb/.
    """
    model, cfg = model_from_checkpoint(checkpoint)
    rgb_dir = Path(rgb_source)
    if (rgb_dir / "rgb").is_dir():
        rgb_dir = rgb_dir / "rgb"
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    files = [p for p in sorted(rgb_dir.iterdir())
             if p.suffix.lower() in IMAGE_EXTS] if rgb_dir.is_dir() else []
    count = 0
    for path in files:
        rgb = load_rgb(path)
        native = rgb.shape[-2:]
        x = F.interpolate(rgb.unsqueeze(0), size=(cfg.input_size,) * 2,
                          mode="bilinear", align_corners=False)
        with torch.no_grad():
            depth = model.forward_depth(x)
        depth = F.interpolate(depth, size=native, mode="bilinear",
                              align_corners=False).clamp(0, 1)
        arr = (depth[0, 0].numpy() * 65535.0).round().astype(np.uint16)
        from PIL import Image
        Image.fromarray(arr).save(out_dir / f"{path.stem}.png")
        count += 1
    return count


# --- stage 3 / supervised -----------------------------------------------------

def _labeled_terms(model, batch, weights: LossWeights, device):
    rgb = batch["rgb"].to(device)
    depth = batch["depth"].to(device)
    gt = batch["gt"].to(device)
    out = model(rgb, depth)
    if out.depth is None:
        sup = supervised_loss(out.saliency, gt, alpha=weights.alpha)
    else:
        sup = supervised_loss(out.saliency, gt, out.depth, depth, weights.alpha)
    return [(sup, out.recon_sum)]


def unlabeled_consistency(s_out, t_out, weights: LossWeights, ablations=()):
    """Consistency term for one unlabeled batch; the attention part is
    dropped under the no_attention_consistency flag."""
    if "no_attention_consistency" in ablations:
        return consistency_loss(s_out.saliency, t_out.saliency,
                                gamma=weights.gamma)
    return consistency_loss(s_out.saliency, t_out.saliency,
                            s_out.attentions, t_out.attentions, weights.gamma)


def train_semi(cfg: RunConfig, labeled, unlabeled, out_dir=None,
               init_from=None) -> TrainResult:
    """Stage 3: mean-teacher training on labeled + pseudo-labeled batches."""
    seed_all(cfg.seed)
    lab_ds = _as_dataset(labeled, "labeled_rgbd", cfg.input_size)
    unl_ds = _as_dataset(unlabeled, "unlabeled_rgb_with_pseudo_depth",
                         cfg.input_size)
    device = torch.device(cfg.device)
    model = build_model(cfg.model).to(device)
    if cfg.init == "stage1":
        if init_from is None:
            raise MissingCheckpoint(
                "stage-3 training initializes from a stage-1 checkpoint; "
                "pass init_from or set init=scratch")
        load_depth_branch(model, load_checkpoint(init_from)["student"])
    teacher = make_teacher(model)
    optimizer = build_optimizer(model, cfg)
    lab_cycler = PoolCycler(len(lab_ds), seed=cfg.seed + 1)
    unl_cycler = PoolCycler(len(unl_ds), seed=cfg.seed + 2)
    weights = cfg.loss
    aug = _augment_cfg(cfg)

    trace = []
    model.train()
    teacher.train()
    for t in range(cfg.max_iter):
        set_lr(optimizer, poly_lr(t, cfg.max_iter, cfg.lr0, cfg.poly_power))
        lab = lab_ds.fetch(lab_cycler.take(cfg.batch_labeled),
                           seed=_iter_seed(cfg, t, 1), augment_cfg=aug)
        labeled_terms = _labeled_terms(model, lab, weights, device)

        unl = unl_ds.fetch(unl_cycler.take(cfg.batch_unlabeled),
                           seed=_iter_seed(cfg, t, 2), augment_cfg=None)
        s_out, t_out = paired_forward(
            model, teacher, unl["rgb"].to(device), unl["depth"].to(device),
            seed=_iter_seed(cfg, t, 3), jitter=cfg.jitter,
            teacher_perturb=cfg.teacher_perturb)
        cons = unlabeled_consistency(s_out, t_out, weights,
                                     cfg.model.ablations)
        unlabeled_terms = [(cons, s_out.recon_sum)]

        loss = total_loss(labeled_terms, unlabeled_terms, weights,
                          t=t, t_max=cfg.max_iter)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        ema_update(teacher, model, cfg.ema_decay)
        trace.append(float(loss.detach()))
        if cfg.log_every and (t % cfg.log_every == 0 or t == cfg.max_iter - 1):
            print(f"[semi {t:6d}] loss={trace[-1]:.5f}")

    ckpt = None
    if out_dir is not None:
        ckpt = save_checkpoint(Path(out_dir) / "stage3_semi.pt", student=model,
                               config=cfg, teacher=teacher, optimizer=optimizer,
                               iteration=cfg.max_iter)
    return TrainResult(model=model, trace=trace, checkpoint=ckpt,
                       teacher=teacher)


def train_supervised(cfg: RunConfig, labeled, out_dir=None,
                     init_from=None) -> TrainResult:
    """The stage-3 loop with an empty unlabeled set (pure supervised)."""
    seed_all(cfg.seed)
    lab_ds = _as_dataset(labeled, "labeled_rgbd", cfg.input_size)
    device = torch.device(cfg.device)
    model = build_model(cfg.model).to(device)
    if init_from is not None:
        load_depth_branch(model, load_checkpoint(init_from)["student"])
    optimizer = build_optimizer(model, cfg)
    cycler = PoolCycler(len(lab_ds), seed=cfg.seed + 1)
    weights = cfg.loss
    aug = _augment_cfg(cfg)

    trace = []
    model.train()
    for t in range(cfg.max_iter):
        set_lr(optimizer, poly_lr(t, cfg.max_iter, cfg.lr0, cfg.poly_power))
        lab = lab_ds.fetch(cycler.take(cfg.batch_labeled),
                           seed=_iter_seed(cfg, t, 1), augment_cfg=aug)
        loss = total_loss(_labeled_terms(model, lab, weights, device),
                          (), weights, t=t, t_max=cfg.max_iter)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        trace.append(float(loss.detach()))
        if cfg.log_every and (t % cfg.log_every == 0 or t == cfg.max_iter - 1):
            print(f"[supervised {t:6d}] loss={trace[-1]:.5f}")

    ckpt = None
    if out_dir is not None:
        ckpt = save_checkpoint(Path(out_dir) / "supervised.pt", student=model,
                               config=cfg, optimizer=optimizer,
                               iteration=cfg.max_iter)
    return TrainResult(model=model, trace=trace, checkpoint=ckpt)


# --- inference ----------------------------------------------------------------

def infer_tensors(model: DepthSaliencyNet, rgb: torch.Tensor,
                  depth: torch.Tensor | None, input_size: int) -> PredictionPair:
    """Forward one [3, H, W] image (student only), depth optional."""
    native = rgb.shape[-2:]
    x = F.interpolate(rgb.unsqueeze(0), size=(input_size,) * 2,
                      mode="bilinear", align_corners=False)
    with torch.no_grad():
        if depth is None:
            d = model.forward_depth(x)
        else:
            d = F.interpolate(depth.unsqueeze(0), size=(input_size,) * 2,
                              mode="bilinear", align_corners=False)
        out = model(x, d)
        sal = F.interpolate(out.saliency, size=native, mode="bilinear",
                            align_corners=False).clamp(0, 1)
        pred_depth = out.depth
        if pred_depth is not None:
            pred_depth = F.interpolate(pred_depth, size=native,
                                       mode="bilinear",
                                       align_corners=False).clamp(0, 1)
    depth_plane = (ImagePlane(pred_depth[0], "depth")
                   if pred_depth is not None else None)
    return PredictionPair(saliency=ImagePlane(sal[0], "saliency"),
                          depth=depth_plane)


def infer(checkpoint, rgb_path, depth_path=None, out_path=None) -> PredictionPair:
    """Load a checkpoint and predict for one image; optionally write the
    saliency map as an 8-bit grayscale PNG."""
    model, cfg = model_from_checkpoint(checkpoint)
    rgb = load_rgb(rgb_path)
    depth = load_depth(depth_path) if depth_path is not None else None
    pair = infer_tensors(model, rgb, depth, cfg.input_size)
    if out_path is not None:
        from PIL import Image
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        arr = (pair.saliency.data[0].numpy() * 255.0).round().astype(np.uint8)
        Image.fromarray(arr).save(out_path)
    return pair


def saliency_mae(model: DepthSaliencyNet, dataset: InMemoryDataset,
                 device="cpu", use_pseudo_depth: bool = False) -> float:
    """Mean absolute error of the saliency maps over a labeled dataset."""
    was_training = model.training
    model.eval()
    errors = []
    with torch.no_grad():
        for i in range(len(dataset)):
            batch = dataset.fetch([i])
            rgb = batch["rgb"].to(device)
            if use_pseudo_depth or "depth" not in batch:
                depth = model.forward_depth(rgb)
            else:
                depth = batch["depth"].to(device)
            out = model(rgb, depth)
            errors.append(float((out.saliency - batch["gt"].to(device)).abs().mean()))
    if was_training:
        model.train()
    return float(np.mean(errors))


def depth_mse(model: DepthSaliencyNet, dataset: InMemoryDataset,
              device="cpu") -> float:
    """Mean squared error of the depth branch over a labeled dataset."""
    was_training = model.training
    model.eval()
    errors = []
    with torch.no_grad():
        for i in range(len(dataset)):
            batch = dataset.fetch([i])
            pred = model.forward_depth(batch["rgb"].to(device))
            errors.append(float(F.mse_loss(pred, batch["depth"].to(device))))
    if was_training:
        model.train()
    return float(np.mean(errors))
