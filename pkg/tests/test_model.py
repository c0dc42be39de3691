import pytest
import torch

from rgbdsal import (ABLATION_FLAGS, DepthInducedFusion, ModelConfig,
                     build_model)
from rgbdsal.fusion import ConcatFuse, DepthAwarenessModule

TINY = ModelConfig(channels=(8, 16, 24, 32))


def _inputs(batch=2, size=64):
    return torch.rand(batch, 3, size, size), torch.rand(batch, 1, size, size)


class TestForwardContract:
    def test_output_shapes(self):
        model = build_model(TINY)
        rgb, depth = _inputs()
        out = model(rgb, depth)
        assert out.saliency.shape == (2, 1, 64, 64)
        assert out.depth.shape == (2, 1, 64, 64)
        assert len(out.attentions) == 4
        assert len(out.recon_losses) == 4

    def test_value_ranges(self):
        model = build_model(TINY)
        out = model(*_inputs())
        assert 0.0 < out.saliency.min() and out.saliency.max() < 1.0
        assert 0.0 < out.depth.min() and out.depth.max() < 1.0
        for att in out.attentions:
            assert 0.0 < att.min() and att.max() < 1.0

    @pytest.mark.parametrize("size", [64, 96, 128])
    def test_any_input_divisible_by_32(self, size):
        model = build_model(TINY)
        out = model(*_inputs(batch=1, size=size))
        assert out.saliency.shape == (1, 1, size, size)
        assert out.depth.shape == (1, 1, size, size)

    def test_attention_pyramid_scales(self):
        model = build_model(TINY)
        out = model(*_inputs(batch=1, size=64))
        assert [a.shape[-1] for a in out.attentions] == [16, 8, 4, 2]

    def test_recon_sum_property(self):
        model = build_model(TINY)
        out = model(*_inputs())
        assert out.recon_sum is not None
        total = sum(r.item() for r in out.recon_losses)
        assert out.recon_sum.item() == pytest.approx(total, rel=1e-6)

    def test_forward_depth_only(self):
        model = build_model(TINY)
        rgb, _ = _inputs(batch=1)
        depth = model.forward_depth(rgb)
        assert depth.shape == (1, 1, 64, 64)
        assert 0.0 < depth.min() and depth.max() < 1.0

    def test_batchnorm_variant_builds(self):
        model = build_model(ModelConfig(channels=(8, 16, 24, 32), norm="batch"))
        out = model(*_inputs())
        assert out.saliency.shape == (2, 1, 64, 64)


class TestAblations:
    def test_unknown_flag_rejected(self):
        with pytest.raises(ValueError):
            ModelConfig(ablations=("no_such_thing",))

    def test_flag_set_is_closed(self):
        assert ABLATION_FLAGS == frozenset({
            "no_dam", "no_dgm", "no_dim", "no_depth_branch",
            "no_reconstruction", "no_attention_consistency"})

    def test_no_dam_swaps_branch(self):
        model = build_model(ModelConfig(channels=(8, 16, 24, 32),
                                        ablations=("no_dam",)))
        assert all(isinstance(f.dam, ConcatFuse) for f in model.fusion)
        out = model(*_inputs())
        assert out.saliency.shape == (2, 1, 64, 64)

    def test_no_dgm_swaps_branch(self):
        model = build_model(ModelConfig(channels=(8, 16, 24, 32),
                                        ablations=("no_dgm",)))
        assert all(isinstance(f.dgm, ConcatFuse) for f in model.fusion)
        model(*_inputs())

    def test_no_dim_drops_attention_maps(self):
        model = build_model(ModelConfig(channels=(8, 16, 24, 32),
                                        ablations=("no_dim",)))
        assert all(isinstance(f, ConcatFuse) for f in model.fusion)
        out = model(*_inputs())
        assert out.attentions == []
        assert out.depth is not None

    def test_no_depth_branch(self):
        model = build_model(ModelConfig(channels=(8, 16, 24, 32),
                                        ablations=("no_depth_branch",)))
        assert all(isinstance(f, DepthAwarenessModule) for f in model.fusion)
        out = model(*_inputs())
        assert out.depth is None
        assert out.attentions == []
        assert out.recon_losses == []
        with pytest.raises(RuntimeError):
            model.forward_depth(_inputs(batch=1)[0])

    def test_no_reconstruction(self):
        model = build_model(ModelConfig(channels=(8, 16, 24, 32),
                                        ablations=("no_reconstruction",)))
        out = model(*_inputs())
        assert out.recon_losses == []
        assert out.recon_sum is None
        assert len(out.attentions) == 4

    def test_no_attention_consistency_is_model_noop(self):
        # trainer-level flag: the network itself is unchanged
        model = build_model(ModelConfig(channels=(8, 16, 24, 32),
                                        ablations=("no_attention_consistency",)))
        out = model(*_inputs())
        assert len(out.attentions) == 4


class TestConfig:
    def test_dim_single_channel_attention(self):
        model = build_model(ModelConfig(channels=(8, 16, 24, 32),
                                        dim_attention_channels=1))
        out = model(*_inputs(batch=1))
        assert all(a.shape[1] == 1 for a in out.attentions)

    def test_fusion_uses_dim_by_default(self):
        model = build_model(TINY)
        assert all(isinstance(f, DepthInducedFusion) for f in model.fusion)

    def test_channels_must_have_four_entries(self):
        with pytest.raises(ValueError):
            ModelConfig(channels=(8, 16))
