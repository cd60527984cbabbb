"""Macro skeletons: the fixed stage layout that searched operators plug into.

A macro fixes the stem, the per-stage block counts / strides / widths, which
stages are searchable, and the classifier head width.  The searched encoder
is the first ``encoder_stages`` stages; any remaining stages form the
classification branch of joint models.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import ArchSpecError
from .blocks import round_half_up


@dataclass(frozen=True)
class StageSpec:
    blocks: int
    stride: int
    channels: int
    searchable: bool = True

    def __post_init__(self):
        if self.stride not in (1, 2):
            raise ArchSpecError(f"stage stride must be 1 or 2, got {self.stride}")
        if self.blocks < 1 or self.channels < 1:
            raise ArchSpecError(f"invalid stage spec {self}")


@dataclass(frozen=True)
class LayerGeom:
    """Geometry of one searchable layer: everything a candidate op needs."""

    position: int       # index into ArchSpec.choices
    stage: int          # 0-based stage index
    block: int          # block index within the stage
    in_ch: int
    out_ch: int
    stride: int
    scale: int          # cumulative downsample factor at the layer input


@dataclass(frozen=True)
class MacroConfig:
    name: str
    in_ch: int
    stem_channels: int
    stages: tuple            # StageSpec, encoder stages first
    encoder_stages: int      # how many leading stages the encoder covers
    head_channels: int       # width of the 1x1 conv before global pooling
    stem_stride: int = 2
    stem_kernel: int = 3

    def __post_init__(self):
        if not 1 <= self.encoder_stages <= len(self.stages):
            raise ArchSpecError(
                f"encoder_stages {self.encoder_stages} out of range for "
                f"{len(self.stages)} stages"
            )

    def searchable_layers(self) -> tuple:
        """Flattened searchable-layer geometries, in forward order."""
        layers = []
        position = 0
        in_ch = self.stem_channels
        scale = self.stem_stride
        for s_idx, stage in enumerate(self.stages):
            for b_idx in range(stage.blocks):
                stride = stage.stride if b_idx == 0 else 1
                if stage.searchable:
                    layers.append(LayerGeom(
                        position=position, stage=s_idx, block=b_idx,
                        in_ch=in_ch, out_ch=stage.channels, stride=stride,
                        scale=scale,
                    ))
                    position += 1
                scale *= stride
                in_ch = stage.channels
        return tuple(layers)

    def num_searchable(self) -> int:
        return len(self.searchable_layers())

    def encoder_output_scale(self) -> int:
        scale = self.stem_stride
        for stage in self.stages[: self.encoder_stages]:
            scale *= stage.stride
        return scale

    def encoder_resolutions(self) -> tuple:
        """Cumulative downsample factor at each encoder stage output."""
        scale = self.stem_stride
        out = []
        for stage in self.stages[: self.encoder_stages]:
            scale *= stage.stride
            out.append(scale)
        return tuple(out)

    def decoder_taps(self) -> tuple:
        """Stage indices feeding skip connections, deepest tap first.

        The last stage producing each resolution shallower than the encoder
        output is tapped.
        """
        resolutions = self.encoder_resolutions()
        deepest = resolutions[-1]
        last_at = {}
        for idx, scale in enumerate(resolutions):
            if scale < deepest:
                last_at[scale] = idx
        return tuple(last_at[scale] for scale in sorted(last_at, reverse=True))


def _scaled(widths, factor):
    return tuple(round_half_up(w * factor) for w in widths)


def cnas_macro(size: str) -> MacroConfig:
    """Classifier skeleton at width factor S/M/L = 0.5/0.75/1.0.

    Six encoder stages with strides (1,2,2,2,1,1) give four distinct
    resolution levels; stages 2-6 and the two classifier-branch stages are
    searchable.
    """
    factors = {"S": 0.5, "M": 0.75, "L": 1.0}
    if size not in factors:
        raise ArchSpecError(f"unknown macro size {size!r}; use one of {sorted(factors)}")
    f = factors[size]
    ch = _scaled((16, 24, 40, 80, 112, 112, 192, 320), f)
    blocks = (1, 2, 2, 3, 3, 2, 2, 1)
    strides = (1, 2, 2, 2, 1, 1, 2, 1)
    searchable = (False, True, True, True, True, True, True, True)
    stages = tuple(
        StageSpec(blocks=b, stride=s, channels=c, searchable=se)
        for b, s, c, se in zip(blocks, strides, ch, searchable)
    )
    return MacroConfig(
        name=size, in_ch=3, stem_channels=round_half_up(16 * f),
        stages=stages, encoder_stages=6, head_channels=round_half_up(1280 * f),
    )


def tiny_macro(searchable_layers: int = 3, in_ch: int = 1,
               channels: int = 16) -> MacroConfig:
    """Minimal skeleton for smoke searches: one searchable block per stage."""
    if searchable_layers < 1:
        raise ArchSpecError("need at least one searchable layer")
    stages = [StageSpec(blocks=1, stride=2 if i == 1 else 1,
                        channels=channels if i == 0 else round_half_up(channels * 1.5),
                        searchable=True)
              for i in range(searchable_layers)]
    return MacroConfig(
        name=f"tiny{searchable_layers}", in_ch=in_ch, stem_channels=8,
        stages=tuple(stages), encoder_stages=len(stages), head_channels=64,
    )


MACRO_PRESETS = {
    "S": lambda: cnas_macro("S"),
    "M": lambda: cnas_macro("M"),
    "L": lambda: cnas_macro("L"),
    "tiny3": lambda: tiny_macro(3),
    "tiny5": lambda: tiny_macro(5),
}


def get_macro(name_or_macro) -> MacroConfig:
    if isinstance(name_or_macro, MacroConfig):
        return name_or_macro
    if name_or_macro in MACRO_PRESETS:
        return MACRO_PRESETS[name_or_macro]()
    raise ArchSpecError(
        f"unknown macro {name_or_macro!r}; use one of {sorted(MACRO_PRESETS)}"
    )
