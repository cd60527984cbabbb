"""Parameterized encoder-decoder denoiser.

Hyperparameters: base width ``b``, depth ``d`` (resolution levels), channel
multiplier ``m`` (width at level i is round(b * m^i)), and ``c`` conv blocks
per level.  Named presets cover the reduced/baseline sizes used throughout
the experiments.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .blocks import ConvBlock, round_half_up


@dataclass(frozen=True)
class UNetConfig:
    b: int = 64
    d: int = 5
    m: float = 2.0
    c: int = 2

    def __post_init__(self):
        if self.b < 1 or self.d < 2 or self.m < 1 or self.c < 1:
            raise ValueError(f"invalid UNet config {self}")

    @property
    def widths(self) -> tuple:
        return tuple(round_half_up(self.b * self.m**i) for i in range(self.d))


UNET_PRESETS = {
    "unet-s": UNetConfig(b=8, d=4, m=1.5, c=2),
    "unet-m": UNetConfig(b=16, d=4, m=2.0, c=2),
    "unet-baseline": UNetConfig(b=64, d=5, m=2.0, c=2),
}


def _stack(in_ch: int, out_ch: int, c: int) -> nn.Sequential:
    blocks = [ConvBlock(in_ch, out_ch)]
    blocks += [ConvBlock(out_ch, out_ch) for _ in range(c - 1)]
    return nn.Sequential(*blocks)


class UNet(nn.Module):
    """Symmetric encoder-decoder with concatenating skip connections.

    ``encode``/``decode`` are exposed separately so joint models can tap the
    bottleneck features.  Output spatial shape equals input shape; input dims
    must be divisible by 2^(d-1).
    """

    task = "denoise"

    def __init__(self, cfg: UNetConfig, in_ch: int = 1, out_ch: int = 1):
        super().__init__()
        self.cfg = cfg
        widths = cfg.widths
        self.widths = widths
        self.enc = nn.ModuleList(
            [_stack(in_ch if i == 0 else widths[i - 1], widths[i], cfg.c)
             for i in range(cfg.d)]
        )
        self.pool = nn.MaxPool2d(2)
        self.up = nn.ModuleList(
            [nn.ConvTranspose2d(widths[i + 1], widths[i], 2, stride=2)
             for i in reversed(range(cfg.d - 1))]
        )
        self.dec = nn.ModuleList(
            [_stack(2 * widths[i], widths[i], cfg.c) for i in reversed(range(cfg.d - 1))]
        )
        self.final = nn.Conv2d(widths[0], out_ch, 1)
        self.bottleneck_channels = widths[-1]
        self.bottleneck_stride = 2 ** (cfg.d - 1)

    def _check_input(self, x):
        div = self.bottleneck_stride
        if x.shape[-1] % div or x.shape[-2] % div:
            raise ValueError(
                f"input {tuple(x.shape[-2:])} not divisible by 2^(d-1)={div}"
            )

    def encode(self, x):
        """Returns (bottleneck, skips); skips are the pre-pool level outputs."""
        self._check_input(x)
        skips = []
        out = x
        for level in self.enc[:-1]:
            out = level(out)
            skips.append(out)
            out = self.pool(out)
        out = self.enc[-1](out)
        return out, skips

    def decode(self, bottleneck, skips):
        out = bottleneck
        for up, block, skip in zip(self.up, self.dec, reversed(skips)):
            out = up(out)
            out = block(torch.cat([out, skip], dim=1))
        return self.final(out)

    def forward(self, x):
        bottleneck, skips = self.encode(x)
        return self.decode(bottleneck, skips)


def make_unet(cfg: UNetConfig, in_ch: int = 1, out_ch: int = 1) -> UNet:
    return UNet(cfg, in_ch=in_ch, out_ch=out_ch)
