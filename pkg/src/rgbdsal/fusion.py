"""Depth-induced fusion at each pyramid level.

Three branches are combined per level: a depth-awareness gate on the
depth-dispelled features, a non-local depth-gated branch driven by the
depth-aware features, and the raw depth features weighted by a learned
attention map. The fused output is their element-wise sum.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import torch
import torch.nn as nn

from .errors import ShapeMismatch, SpatialTooLarge


class FusionOutputs(NamedTuple):
    fused: torch.Tensor
    attention: Optional[torch.Tensor]
    f_dam: Optional[torch.Tensor] = None
    f_dgm: Optional[torch.Tensor] = None
    f_d: Optional[torch.Tensor] = None


def _check_same_shape(name, *tensors):
    shapes = {tuple(t.shape) for t in tensors}
    if len(shapes) != 1:
        raise ShapeMismatch(f"{name} inputs differ", actual=sorted(shapes))


class ChannelAttention(nn.Module):
    """conv3x3 -> global average pooling; [B, C, 1, 1] channel weights."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, d):
        return self.conv(d).mean(dim=(2, 3), keepdim=True)


class SpatialAttention(nn.Module):
    """conv3x3 -> softmax over positions, rescaled by H*W so the mean gate is 1."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, 1, 3, padding=1)

    def forward(self, d):
        b, _, h, w = d.shape
        att = torch.softmax(self.conv(d).view(b, 1, h * w), dim=-1)
        return att.view(b, 1, h, w) * (h * w)


class DepthAwarenessModule(nn.Module):
    """Recalibrate depth-dispelled features with channel and spatial cues
    computed from the depth features: S_att(d) * (C_att(d) * r_s)."""

    def __init__(self, channels: int):
        super().__init__()
        self.channel_att = ChannelAttention(channels)
        self.spatial_att = SpatialAttention(channels)

    def forward(self, r_s, d):
        _check_same_shape("dam", r_s, d)
        return self.spatial_att(d) * (self.channel_att(d) * r_s)


class DepthGatedModule(nn.Module):
    """Non-local gate: pairwise affinities from the depth-aware features
    route depth values across all positions.

    query/key come from r_d, value from d; similarity is row-softmaxed by
    default. Convs are bias-free so an all-zero depth input yields an
    exactly-zero output (the value path vanishes).
    """

    def __init__(self, channels: int, softmax: bool = True, hw_cap: int = 4096):
        super().__init__()
        self.query = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.key = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.value = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.out = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.softmax = softmax
        self.hw_cap = hw_cap

    def affinity(self, r_d):
        """[B, HW, HW] similarity matrix (row-normalized when enabled)."""
        b, c, h, w = r_d.shape
        if h * w > self.hw_cap:
            raise SpatialTooLarge(
                f"HW={h * w} exceeds dgm.hw_cap={self.hw_cap}")
        q = self.query(r_d).view(b, c, h * w)                  # [B, C, HW]
        k = self.key(r_d).view(b, c, h * w).permute(0, 2, 1)   # [B, HW, C]
        sim = torch.bmm(k, q)                                  # [B, HW, HW]
        if self.softmax:
            sim = torch.softmax(sim, dim=-1)
        return sim

    def forward(self, r_d, d):
        _check_same_shape("dgm", r_d, d)
        b, c, h, w = r_d.shape
        sim = self.affinity(r_d)
        v = self.value(d).view(b, c, h * w).permute(0, 2, 1)   # [B, HW, C]
        out = torch.bmm(sim, v)                                # [B, HW, C]
        out = out.permute(0, 2, 1).reshape(b, c, h, w)
        return self.out(out)


class ConcatFuse(nn.Module):
    """1x1 conv over concatenated inputs; ablation stand-in for a branch."""

    def __init__(self, n_inputs: int, channels: int):
        super().__init__()
        self.proj = nn.Conv2d(n_inputs * channels, channels, 1)

    def forward(self, *xs):
        _check_same_shape("concat-fuse", *xs)
        return self.proj(torch.cat(xs, dim=1))


class DepthInducedFusion(nn.Module):
    """One fusion level: DAM + DGM + attention-weighted depth features.

    attention_channels: "full" gives a per-channel gate (C channels), 1
    gives a single-channel gate broadcast over channels.
    """

    def __init__(self, channels: int, attention_channels="full",
                 dgm_softmax: bool = True, hw_cap: int = 4096,
                 use_dam: bool = True, use_dgm: bool = True):
        super().__init__()
        self.channels = channels
        self.dam = (DepthAwarenessModule(channels) if use_dam
                    else ConcatFuse(2, channels))
        self.dgm = (DepthGatedModule(channels, dgm_softmax, hw_cap) if use_dgm
                    else ConcatFuse(2, channels))
        att_out = channels if attention_channels == "full" else int(attention_channels)
        if att_out not in (1, channels):
            raise ValueError("dim.attention_channels must be 'full' or 1")
        self.att_conv = nn.Conv2d(2 * channels, att_out, 3, padding=1)

    def attention(self, f_dam, f_dgm):
        _check_same_shape("dim attention", f_dam, f_dgm)
        return torch.sigmoid(self.att_conv(torch.cat([f_dgm, f_dam], dim=1)))

    def forward(self, r_s, r_d, d) -> FusionOutputs:
        _check_same_shape("dim", r_s, r_d, d)
        f_dam = self.dam(r_s, d)
        f_dgm = self.dgm(r_d, d)
        a = self.attention(f_dam, f_dgm)
        f_d = a * d
        fused = f_dam + f_dgm + f_d
        return FusionOutputs(fused=fused, attention=a, f_dam=f_dam,
                             f_dgm=f_dgm, f_d=f_d)
