import pytest
import torch

from conftest import zero_init
from rgbdsal import AtrousPyramid, SaliencyDecoder
from rgbdsal.errors import InputTooSmall, MissingLevel, ShapeMismatch

CH = (16, 32, 64, 128)


def _fused(batch=1, size=256, channels=CH):
    return [torch.rand(batch, c, size // s, size // s)
            for c, s in zip(channels, (4, 8, 16, 32))]


class TestAtrousPyramid:
    def test_size_preserving(self):
        aspp = AtrousPyramid(32)
        assert aspp(torch.rand(1, 32, 64, 64)).shape == (1, 32, 64, 64)

    def test_too_small_rejected(self):
        aspp = AtrousPyramid(32)
        with pytest.raises(InputTooSmall):
            aspp(torch.rand(1, 32, 2, 2))

    def test_zero_init_zero_output(self):
        aspp = zero_init(AtrousPyramid(8))
        out = aspp(torch.zeros(1, 8, 8, 8))
        assert torch.equal(out, torch.zeros_like(out))

    def test_default_rates(self):
        assert AtrousPyramid(8).rates == (1, 6, 12, 18)


class TestMergeAdjacent:
    def test_shape_contract(self):
        dec = SaliencyDecoder((16,) * 4, width=16)
        out = dec.merge_adjacent(torch.rand(1, 16, 32, 32),
                                 torch.rand(1, 16, 16, 16), level=0)
        assert out.shape == (1, 16, 32, 32)

    def test_wrong_scale_rejected(self):
        dec = SaliencyDecoder((16,) * 4, width=16)
        with pytest.raises(ShapeMismatch):
            dec.merge_adjacent(torch.rand(1, 16, 32, 32),
                               torch.rand(1, 16, 12, 12), level=0)

    def test_zero_inputs_zero_output(self):
        dec = zero_init(SaliencyDecoder((16,) * 4, width=16))
        out = dec.merge_adjacent(torch.zeros(1, 16, 32, 32),
                                 torch.zeros(1, 16, 16, 16), level=0)
        assert torch.equal(out, torch.zeros_like(out))


class TestDecodeSaliency:
    def test_full_decode_256(self):
        dec = SaliencyDecoder(CH)
        out = dec(_fused(batch=2), target_size=256)
        assert out.shape == (2, 1, 256, 256)
        assert out.min() > 0.0 and out.max() < 1.0

    def test_two_levels_rejected(self):
        dec = SaliencyDecoder(CH)
        with pytest.raises(MissingLevel):
            dec(_fused()[:2], target_size=256)

    def test_sigmoid_range_strict(self):
        dec = SaliencyDecoder(CH)
        out = dec(_fused(size=64), target_size=64)
        assert out.min() > 0.0 and out.max() < 1.0

    def test_small_input_decodes(self):
        # 32px input: level sizes 8/4/2/1, all below the atrous minimum
        dec = SaliencyDecoder(CH)
        out = dec(_fused(size=32), target_size=32)
        assert out.shape == (1, 1, 32, 32)

    def test_concat_merge_variant(self):
        dec = SaliencyDecoder(CH, merge="concat")
        out = dec(_fused(size=64), target_size=64)
        assert out.shape == (1, 1, 64, 64)

    def test_bad_merge_name(self):
        with pytest.raises(ValueError):
            SaliencyDecoder(CH, merge="mean")
