import pytest
import torch
import torch.nn as nn

from rgbdsal import (ModelConfig, build_model, consistency_loss, ema_update,
                     make_teacher, paired_forward, perturb)
from rgbdsal.errors import OutOfRange

TINY = ModelConfig(channels=(8, 16, 24, 32))


class _Scalar(nn.Module):
    def __init__(self, value):
        super().__init__()
        self.w = nn.Parameter(torch.tensor(value, dtype=torch.float64))


class TestEmaUpdate:
    def test_decay_zero_copies_student(self):
        t, s = _Scalar(1.0), _Scalar(0.25)
        ema_update(t, s, decay=0.0)
        assert t.w.item() == 0.25

    def test_decay_one_freezes_teacher(self):
        t, s = _Scalar(1.0), _Scalar(0.25)
        ema_update(t, s, decay=1.0)
        assert t.w.item() == 1.0

    def test_single_step_closed_form(self):
        t, s = _Scalar(1.0), _Scalar(0.0)
        ema_update(t, s, decay=0.99)
        assert t.w.item() == pytest.approx(0.99, abs=1e-12)

    @pytest.mark.parametrize("k", [1, 5, 50])
    def test_k_step_law(self, k):
        t0, s_val, d = 0.7, -0.3, 0.99
        t, s = _Scalar(t0), _Scalar(s_val)
        for _ in range(k):
            ema_update(t, s, decay=d)
        expected = d ** k * t0 + (1 - d ** k) * s_val
        assert t.w.item() == pytest.approx(expected, abs=1e-10)

    def test_decay_out_of_range(self):
        t, s = _Scalar(0.0), _Scalar(0.0)
        with pytest.raises(OutOfRange):
            ema_update(t, s, decay=1.5)

    def test_teacher_requires_no_grad(self):
        model = build_model(TINY)
        teacher = make_teacher(model)
        assert all(not p.requires_grad for p in teacher.parameters())


class TestPerturb:
    def test_zero_jitter_is_identity(self):
        x = torch.rand(3, 16, 16)
        assert torch.equal(perturb(x, seed=3, jitter=0.0), x)

    def test_same_seed_same_output(self):
        x = torch.rand(1, 3, 16, 16)
        a = perturb(x, seed=42)
        b = perturb(x, seed=42)
        assert torch.equal(a, b)

    def test_different_seed_differs(self):
        x = torch.rand(1, 3, 16, 16)
        assert not torch.equal(perturb(x, seed=1), perturb(x, seed=2))

    def test_output_clamped(self):
        x = torch.rand(2, 3, 8, 8)
        for seed in range(8):
            out = perturb(x, seed=seed, jitter=0.9)
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_negative_jitter_rejected(self):
        with pytest.raises(OutOfRange):
            perturb(torch.rand(3, 4, 4), seed=0, jitter=-0.1)


class TestPairedForward:
    def test_consistency_null_case(self):
        # jitter 0 and teacher == student: both paths compute the same thing
        model = build_model(TINY)
        model.eval()
        teacher = make_teacher(model)
        rgb = torch.rand(2, 3, 64, 64)
        depth = torch.rand(2, 1, 64, 64)
        s_out, t_out = paired_forward(model, teacher, rgb, depth,
                                      seed=0, jitter=0.0)
        loss = consistency_loss(s_out.saliency, t_out.saliency,
                                s_out.attentions, t_out.attentions)
        assert loss.item() == 0.0

    def test_teacher_output_detached(self):
        model = build_model(TINY)
        teacher = make_teacher(model)
        rgb = torch.rand(1, 3, 64, 64)
        depth = torch.rand(1, 1, 64, 64)
        s_out, t_out = paired_forward(model, teacher, rgb, depth, seed=1)
        assert s_out.saliency.requires_grad
        assert not t_out.saliency.requires_grad

    def test_outputs_shape_matched(self):
        model = build_model(TINY)
        teacher = make_teacher(model)
        rgb = torch.rand(2, 3, 64, 64)
        depth = torch.rand(2, 1, 64, 64)
        s_out, t_out = paired_forward(model, teacher, rgb, depth, seed=5)
        assert s_out.saliency.shape == t_out.saliency.shape
        assert len(s_out.attentions) == len(t_out.attentions) == 4
        for sa, ta in zip(s_out.attentions, t_out.attentions):
            assert sa.shape == ta.shape

    def test_clean_teacher_view(self):
        model = build_model(TINY)
        model.eval()
        teacher = make_teacher(model)
        rgb = torch.rand(1, 3, 64, 64)
        depth = torch.rand(1, 1, 64, 64)
        with torch.no_grad():
            clean = teacher(rgb, depth)
        _, t_out = paired_forward(model, teacher, rgb, depth, seed=9,
                                  jitter=0.4, teacher_perturb="clean")
        assert torch.equal(t_out.saliency, clean.saliency)
