"""EMA teacher maintenance and input perturbation for consistency training."""

from __future__ import annotations

import copy

import torch

from .errors import OutOfRange, ShapeMismatch

# Fixed offset separating the teacher's jitter stream from the student's.
_TEACHER_SEED_OFFSET = 0x9E3779B1


def make_teacher(student: torch.nn.Module) -> torch.nn.Module:
    """Deep-copied frozen snapshot of the student."""
    teacher = copy.deepcopy(student)
    for p in teacher.parameters():
        p.requires_grad_(False)
    return teacher


@torch.no_grad()
def ema_update(teacher: torch.nn.Module, student: torch.nn.Module,
               decay: float = 0.99) -> None:
    """teacher <- decay * teacher + (1 - decay) * student, per parameter.

    Buffers (if any) are copied straight from the student.
    """
    if not 0.0 <= decay <= 1.0:
        raise OutOfRange(f"ema decay must lie in [0, 1], got {decay}")
    t_params = dict(teacher.named_parameters())
    s_params = dict(student.named_parameters())
    if t_params.keys() != s_params.keys():
        raise ShapeMismatch("teacher/student parameter sets differ")
    for name, tp in t_params.items():
        sp = s_params[name]
        if tp.shape != sp.shape:
            raise ShapeMismatch("parameter shape drift", level=name,
                                expected=tuple(tp.shape), actual=tuple(sp.shape))
        tp.mul_(decay).add_(sp, alpha=1.0 - decay)
    for tb, sb in zip(teacher.buffers(), student.buffers()):
        tb.copy_(sb)


def perturb(rgb: torch.Tensor, seed: int, jitter: float = 0.4) -> torch.Tensor:
    """Color jitter: brightness, contrast, saturation with factors drawn
    uniformly from [1-jitter, 1+jitter]. Deterministic given the seed;
    output clamped to [0, 1]. Accepts [3, H, W] or [B, 3, H, W]."""
    if jitter < 0:
        raise OutOfRange(f"jitter must be nonnegative, got {jitter}")
    if jitter == 0:
        return rgb.clone()
    gen = torch.Generator().manual_seed(int(seed) & 0xFFFFFFFFFFFF)
    lo, hi = 1.0 - jitter, 1.0 + jitter
    b, c, s = (lo + (hi - lo) * torch.rand(3, generator=gen)).tolist()

    x = (rgb * b).clamp(0.0, 1.0)

    weights = torch.tensor([0.299, 0.587, 0.114], dtype=x.dtype,
                           device=x.device).view(3, 1, 1)
    gray = (x * weights).sum(dim=-3, keepdim=True)           # [..., 1, H, W]
    x = (c * x + (1.0 - c) * gray.mean(dim=(-2, -1), keepdim=True)).clamp(0.0, 1.0)

    gray = (x * weights).sum(dim=-3, keepdim=True)
    x = (s * x + (1.0 - s) * gray).clamp(0.0, 1.0)
    return x


def paired_forward(student, teacher, rgb, pseudo_depth, seed: int,
                   jitter: float = 0.4, teacher_perturb: str = "jitter"):
    """Run the student on one jittered view and the teacher on another.

    Both receive the same pseudo depth; the teacher runs without gradient
    tracking. Returns (student_outputs, teacher_outputs).
    """
    if teacher_perturb not in ("jitter", "clean"):
        raise ValueError(f"perturb.teacher must be jitter|clean, got {teacher_perturb!r}")
    student_view = perturb(rgb, seed, jitter)
    if teacher_perturb == "jitter":
        teacher_view = perturb(rgb, seed + _TEACHER_SEED_OFFSET, jitter)
    else:
        teacher_view = rgb
    s_out = student(student_view, pseudo_depth)
    with torch.no_grad():
        t_out = teacher(teacher_view, pseudo_depth)
    return s_out, t_out
