"""Small building blocks shared by the encoder, decoupling, and fusion stages."""

import math

import torch.nn as nn


def make_norm(kind: str, channels: int) -> nn.Module:
    """Normalization factory.

    "group" is the default everywhere: it has no running statistics, so it
    behaves identically in train/eval mode and stays well-posed at B=1.
    "batch" restores plain BatchNorm2d.
    """
    if kind == "group":
        return nn.GroupNorm(math.gcd(channels, 8), channels)
    if kind == "batch":
        return nn.BatchNorm2d(channels)
    raise ValueError(f"unknown norm kind: {kind!r}")


class ConvBlock(nn.Module):
    """conv3x3 -> norm -> ReLU -> conv3x3, spatial size preserved."""

    def __init__(self, in_channels: int, out_channels: int, norm: str = "group"):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.norm = make_norm(norm, out_channels)
        self.act = nn.ReLU(inplace=True)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)

    def forward(self, x):
        return self.conv2(self.act(self.norm(self.conv1(x))))
