"""The full RGB-D saliency network: dual encoders, feature decoupling with a
depth head, per-level depth-induced fusion, and the saliency decoder.

Ablation flags rewire the graph:
  no_dam / no_dgm        replace that branch with concat + 1x1 conv
  no_dim                 replace whole fusion levels with concat + 1x1 conv
  no_depth_branch        drop decoupling + depth head; fuse RGB features
                         with depth features through the awareness gate only
  no_reconstruction      skip the per-level reconstruction losses
  no_attention_consistency  (training-time flag; the graph is unchanged)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import torch
import torch.nn as nn

from .backbone import EncoderSpec, build_encoder, encode_depth, encode_rgb
from .decoder import SaliencyDecoder
from .decouple import DepthHead, FeatureDecoupler
from .fusion import ConcatFuse, DepthAwarenessModule, DepthInducedFusion

ABLATION_FLAGS = frozenset({
    "no_dam", "no_dgm", "no_dim", "no_depth_branch",
    "no_reconstruction", "no_attention_consistency",
})


@dataclass(frozen=True)
class ModelConfig:
    encoder: str = "tiny"
    channels: tuple = (16, 32, 64, 128)
    norm: str = "group"
    common_width: int = 0
    dgm_softmax: bool = True
    dgm_hw_cap: int = 4096
    dim_attention_channels: object = "full"  # "full" or 1
    decoder_width: int = 64
    decoder_merge: str = "add"
    aspp_rates: tuple = (1, 6, 12, 18)
    depth_head_width: int = 64
    ablations: tuple = ()

    def __post_init__(self):
        unknown = set(self.ablations) - ABLATION_FLAGS
        if unknown:
            raise ValueError(f"unknown ablation flags: {sorted(unknown)}")
        if len(self.channels) != 4:
            raise ValueError(
                f"channels needs one entry per level, got {self.channels}")


@dataclass
class NetOutputs:
    saliency: torch.Tensor            # [B, 1, H, W] in (0, 1)
    depth: Optional[torch.Tensor]     # [B, 1, H, W] in [0, 1], None when ablated
    attentions: list = field(default_factory=list)   # per-level fusion gates
    recon_losses: list = field(default_factory=list)  # per-level scalars

    @property
    def recon_sum(self):
        if not self.recon_losses:
            return None
        return sum(self.recon_losses)


class DepthSaliencyNet(nn.Module):

    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        abl = set(cfg.ablations)
        self.no_depth_branch = "no_depth_branch" in abl
        self.no_dim = "no_dim" in abl
        self.no_reconstruction = "no_reconstruction" in abl

        spec = EncoderSpec(name=cfg.encoder, channels_per_level=cfg.channels,
                           norm=cfg.norm, common_width=cfg.common_width)
        self.rgb_encoder = build_encoder(spec)
        self.depth_encoder = build_encoder(spec)
        channels = self.rgb_encoder.channels

        if not self.no_depth_branch:
            self.decoupler = FeatureDecoupler(channels, cfg.norm)
            self.depth_head = DepthHead(channels, cfg.depth_head_width)

        if self.no_depth_branch:
            # Raw RGB features gated by depth cues; no non-local branch,
            # no fusion attention maps.
            self.fusion = nn.ModuleList(
                DepthAwarenessModule(c) for c in channels)
        elif self.no_dim:
            self.fusion = nn.ModuleList(ConcatFuse(3, c) for c in channels)
        else:
            self.fusion = nn.ModuleList(
                DepthInducedFusion(
                    c, attention_channels=cfg.dim_attention_channels,
                    dgm_softmax=cfg.dgm_softmax, hw_cap=cfg.dgm_hw_cap,
                    use_dam="no_dam" not in abl,
                    use_dgm="no_dgm" not in abl)
                for c in channels)

        self.decoder = SaliencyDecoder(channels, width=cfg.decoder_width,
                                       merge=cfg.decoder_merge,
                                       rates=cfg.aspp_rates)

    def forward(self, rgb: torch.Tensor, depth: torch.Tensor) -> NetOutputs:
        size = rgb.shape[-2:]
        r_levels = encode_rgb(self.rgb_encoder, rgb).levels
        d_levels = encode_depth(self.depth_encoder, depth).levels

        if self.no_depth_branch:
            fused = [gate(r, d) for gate, r, d in
                     zip(self.fusion, r_levels, d_levels)]
            return NetOutputs(self.decoder(fused, size), None)

        decoupled = self.decoupler.disentangle(r_levels)
        aware, dispelled = decoupled
        depth_pred = self.depth_head(aware, size)
        recon = ([] if self.no_reconstruction else
                 self.decoupler.reconstruction_losses(decoupled, r_levels))

        if self.no_dim:
            fused = [f(s, a, d) for f, s, a, d in
                     zip(self.fusion, dispelled, aware, d_levels)]
            attentions = []
        else:
            outs = [f(s, a, d) for f, s, a, d in
                    zip(self.fusion, dispelled, aware, d_levels)]
            fused = [o.fused for o in outs]
            attentions = [o.attention for o in outs]

        saliency = self.decoder(fused, size)
        return NetOutputs(saliency, depth_pred, attentions, recon)

    def forward_depth(self, rgb: torch.Tensor) -> torch.Tensor:
        """Depth-branch-only forward for stage-1 training and pseudo labels."""
        if self.no_depth_branch:
            raise RuntimeError("model built without a depth branch")
        r_levels = encode_rgb(self.rgb_encoder, rgb).levels
        aware, _ = self.decoupler.disentangle(r_levels)
        return self.depth_head(aware, rgb.shape[-2:])


def build_model(cfg: ModelConfig) -> DepthSaliencyNet:
    return DepthSaliencyNet(cfg)
