"""Building blocks: plain conv blocks, squeeze-excitation, inverted residuals."""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from ..errors import ArchSpecError


def round_half_up(x: float) -> int:
    """Channel rounding for fractional widths; .5 always rounds up, minimum 1."""
    return max(1, int(math.floor(x + 0.5)))


@dataclass(frozen=True)
class MBConvConfig:
    """One inverted-residual candidate: kernel size, expansion rate, SE flag."""

    kernel: int
    expansion: float
    se: bool = False

    def __post_init__(self):
        if self.kernel % 2 != 1:
            raise ArchSpecError(f"kernel must be odd, got {self.kernel}")
        if self.expansion <= 0:
            raise ArchSpecError(f"expansion must be positive, got {self.expansion}")

    @property
    def name(self) -> str:
        e = self.expansion
        e_str = str(int(e)) if float(e).is_integer() else str(e)
        return f"MB-k{self.kernel}-e{e_str}" + ("-se" if self.se else "")


def group_norm(channels: int) -> nn.GroupNorm:
    """Group normalization with min(8, channels) groups (must divide channels)."""
    groups = min(8, channels)
    while channels % groups != 0:
        groups -= 1
    return nn.GroupNorm(groups, channels)


class ConvBlock(nn.Module):
    """3x3 conv + group norm + ReLU, the unit used in manual denoisers."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int = 3):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, kernel, padding=kernel // 2)
        self.norm = group_norm(out_ch)
        self.act = nn.ReLU(inplace=True)

    def forward(self, x):
        return self.act(self.norm(self.conv(x)))


class SqueezeExcite(nn.Module):
    """Channel gating: global average pool -> reduce -> ReLU -> expand -> sigmoid."""

    def __init__(self, channels: int, reduced: int | None = None):
        super().__init__()
        reduced = reduced if reduced is not None else max(1, channels // 4)
        self.reduce = nn.Conv2d(channels, reduced, 1)
        self.expand = nn.Conv2d(reduced, channels, 1)

    def forward(self, x):
        s = x.mean(dim=(2, 3), keepdim=True)
        s = torch.relu(self.reduce(s))
        s = torch.sigmoid(self.expand(s))
        return x * s


class MBConv(nn.Module):
    """Inverted residual with a linear bottleneck.

    1x1 expand (skipped when the expanded width equals ``in_ch``), depthwise
    conv, optional squeeze-excitation, 1x1 linear projection.  The residual
    add is present iff stride == 1 and in_ch == out_ch.
    """

    def __init__(self, in_ch: int, out_ch: int, cfg: MBConvConfig, stride: int = 1):
        super().__init__()
        if stride not in (1, 2):
            raise ArchSpecError(f"stride must be 1 or 2, got {stride}")
        if in_ch < 1 or out_ch < 1:
            raise ArchSpecError(f"channels must be positive, got {in_ch}->{out_ch}")
        self.cfg = cfg
        self.stride = stride
        mid = round_half_up(cfg.expansion * in_ch)
        if mid != in_ch:
            self.expand = nn.Sequential(
                nn.Conv2d(in_ch, mid, 1, bias=False),
                nn.BatchNorm2d(mid),
                nn.ReLU(inplace=True),
            )
        else:
            self.expand = None
        self.depthwise = nn.Sequential(
            nn.Conv2d(mid, mid, cfg.kernel, stride=stride, padding=cfg.kernel // 2,
                      groups=mid, bias=False),
            nn.BatchNorm2d(mid),
            nn.ReLU(inplace=True),
        )
        self.se = SqueezeExcite(mid) if cfg.se else None
        self.project = nn.Sequential(
            nn.Conv2d(mid, out_ch, 1, bias=False),
            nn.BatchNorm2d(out_ch),
        )
        self.use_residual = stride == 1 and in_ch == out_ch

    def forward(self, x):
        out = x if self.expand is None else self.expand(x)
        out = self.depthwise(out)
        if self.se is not None:
            out = self.se(out)
        out = self.project(out)
        if self.use_residual:
            out = out + x
        return out


def make_mbconv(cfg: MBConvConfig, in_ch: int, out_ch: int, stride: int = 1) -> MBConv:
    return MBConv(in_ch, out_ch, cfg, stride=stride)
