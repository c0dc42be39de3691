import pytest
import torch

from rgbdsal import EncoderSpec, build_encoder, encode_depth, encode_rgb, seed_all, validate_pyramid
from rgbdsal.errors import UnknownEncoder

TINY = EncoderSpec()


def test_spec_requires_four_channel_entries():
    with pytest.raises(ValueError):
        EncoderSpec(channels_per_level=(16, 32, 64))


def test_unknown_encoder_name():
    with pytest.raises(UnknownEncoder):
        build_encoder(EncoderSpec(name="bogus"))


def test_rgb_shapes_256():
    enc = build_encoder(TINY)
    pyr = encode_rgb(enc, torch.rand(2, 3, 256, 256))
    assert pyr.source == "rgb_encoder"
    for lvl, (c, s) in zip(pyr, zip(TINY.channels_per_level, (4, 8, 16, 32))):
        assert lvl.shape == (2, c, 256 // s, 256 // s)
    validate_pyramid(pyr, input_size=256)


def test_rgb_shapes_64():
    enc = build_encoder(TINY)
    pyr = encode_rgb(enc, torch.rand(1, 3, 64, 64))
    assert [lvl.shape[-1] for lvl in pyr] == [16, 8, 4, 2]


def test_depth_matches_rgb_shapes():
    enc_r = build_encoder(TINY)
    enc_d = build_encoder(TINY)
    rgb = torch.rand(2, 3, 64, 64)
    depth = torch.rand(2, 1, 64, 64)
    pr = encode_rgb(enc_r, rgb)
    pd = encode_depth(enc_d, depth)
    assert pd.source == "depth_encoder"
    for a, b in zip(pr, pd):
        assert a.shape == b.shape


def test_zero_depth_is_finite():
    enc = build_encoder(TINY)
    pyr = encode_depth(enc, torch.zeros(1, 1, 64, 64))
    for lvl in pyr:
        assert torch.isfinite(lvl).all()


def test_batch_dim_carried():
    enc = build_encoder(TINY)
    pyr = encode_depth(enc, torch.rand(4, 1, 64, 64))
    assert all(lvl.shape[0] == 4 for lvl in pyr)


def test_gradient_reaches_input():
    enc = build_encoder(TINY)
    x = torch.rand(1, 3, 32, 32, requires_grad=True)
    pyr = encode_rgb(enc, x)
    total = sum(lvl.sum() for lvl in pyr)
    total.backward()
    assert x.grad is not None and x.grad.abs().sum() > 0


def test_forward_deterministic_under_seed():
    x = torch.rand(1, 3, 64, 64)
    seed_all(5)
    a = [lvl.clone() for lvl in encode_rgb(build_encoder(TINY), x)]
    seed_all(5)
    b = [lvl.clone() for lvl in encode_rgb(build_encoder(TINY), x)]
    for la, lb in zip(a, b):
        assert torch.equal(la, lb)


def test_common_width_projection():
    spec = EncoderSpec(common_width=24)
    pyr = encode_rgb(build_encoder(spec), torch.rand(1, 3, 64, 64))
    assert all(lvl.shape[1] == 24 for lvl in pyr)
