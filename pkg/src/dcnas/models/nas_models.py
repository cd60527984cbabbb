"""Builders that turn an ArchSpec into concrete networks.

* ``build_cnas`` — classifier: stem, all macro stages, 1x1 conv head.
* ``build_dnas`` — denoiser: the first six (encoder) stages plus a fixed
  decoder of transposed-conv upsampling and two convs per level with skip
  connections.  The decoder is never searched.
* ``build_dcnas`` — integrated joint model: shared encoder feeding the
  decoder and the remaining classifier stages.
* ``build_dcnas_seq`` — sequential joint model: a full denoiser followed by
  a complete classifier reading the denoised image.
* ``build_decoder_variant`` — integrated model with alternative decoder
  operators / depths for decoder-tuning studies.
"""
from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import ArchSpecError
from .archspec import ArchSpec
from .blocks import MBConv, MBConvConfig
from .macro import MacroConfig, get_macro

FIXED_BLOCK = MBConvConfig(kernel=3, expansion=1.0)

DECODER_VARIANTS = {
    "conv": dict(op="conv", ops_per_level=2, levels=None),
    "mbconv": dict(op="mbconv", ops_per_level=2, levels=None),
    "mbconv-1op": dict(op="mbconv", ops_per_level=1, levels=None),
    "mbconv-3layer": dict(op="mbconv", ops_per_level=2, levels=3),
}


def _conv_bn_act(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


def _stem(macro: MacroConfig) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(macro.in_ch, macro.stem_channels, macro.stem_kernel,
                  stride=macro.stem_stride, padding=macro.stem_kernel // 2,
                  bias=False),
        nn.BatchNorm2d(macro.stem_channels),
        nn.ReLU(inplace=True),
    )


def _build_stages(spec: ArchSpec, macro: MacroConfig, space, stage_range):
    """Instantiate blocks for the given stage range; all blocks always run."""
    stages = nn.ModuleList()
    layers = {(g.stage, g.block): g for g in macro.searchable_layers()}
    in_ch = macro.stem_channels
    for s_idx, stage in enumerate(macro.stages):
        if s_idx < stage_range[0]:
            in_ch = stage.channels
            continue
        if s_idx >= stage_range[1]:
            break
        blocks = []
        for b_idx in range(stage.blocks):
            stride = stage.stride if b_idx == 0 else 1
            geom = layers.get((s_idx, b_idx))
            cfg = space.candidates[spec.choices[geom.position]] if geom else FIXED_BLOCK
            blocks.append(MBConv(in_ch, stage.channels, cfg, stride=stride))
            in_ch = stage.channels
        stages.append(nn.Sequential(*blocks))
    return stages


class NasEncoder(nn.Module):
    """Stem plus the leading encoder stages; records skip taps for decoders."""

    def __init__(self, spec: ArchSpec, macro: MacroConfig, space):
        super().__init__()
        self.stem = _stem(macro)
        self.stages = _build_stages(spec, macro, space, (0, macro.encoder_stages))
        self.taps = macro.decoder_taps()
        chans = [st.channels for st in macro.stages[: macro.encoder_stages]]
        self.tap_channels = tuple(chans[i] for i in self.taps)
        self.out_channels = chans[-1]
        self.out_scale = macro.encoder_output_scale()

    def forward(self, x):
        out = self.stem(x)
        feats = []
        for stage in self.stages:
            out = stage(out)
            feats.append(out)
        skips = [feats[i] for i in self.taps]  # deepest tap first
        return out, skips


class ClassifierBranch(nn.Module):
    """Remaining stages plus 1x1 conv, global average pool, linear head."""

    def __init__(self, spec: ArchSpec, macro: MacroConfig, space, num_classes: int):
        super().__init__()
        self.stages = _build_stages(
            spec, macro, space, (macro.encoder_stages, len(macro.stages))
        )
        last_ch = macro.stages[-1].channels if len(macro.stages) > macro.encoder_stages \
            else macro.stages[macro.encoder_stages - 1].channels
        self.head = nn.Sequential(
            nn.Conv2d(last_ch, macro.head_channels, 1, bias=False),
            nn.BatchNorm2d(macro.head_channels),
            nn.ReLU(inplace=True),
        )
        self.fc = nn.Linear(macro.head_channels, num_classes)

    def forward(self, x):
        out = x
        for stage in self.stages:
            out = stage(out)
        out = self.head(out).mean(dim=(2, 3))
        return self.fc(out)


class NasDecoder(nn.Module):
    """Fixed (not searched) upsampling path with concatenated skips.

    Each level is one transposed conv (exact x2) followed by
    ``ops_per_level`` operators (plain convs or inverted residuals).  When
    fewer levels than the encoder's downsampling depth are used, the output
    is bilinearly upsampled to the input size after the final projection.
    """

    def __init__(self, in_ch: int, skip_channels, full_levels: int, out_ch: int = 3,
                 op: str = "conv", ops_per_level: int = 2, levels: int | None = None):
        super().__init__()
        if op not in ("conv", "mbconv"):
            raise ArchSpecError(f"unknown decoder operator {op!r}")
        levels = full_levels if levels is None else levels
        if not 1 <= levels <= full_levels:
            raise ArchSpecError(
                f"decoder levels {levels} out of range (encoder depth {full_levels})"
            )
        self.final_upsample = 2 ** (full_levels - levels)
        widths = list(skip_channels) + [skip_channels[-1]] * (levels - len(skip_channels))
        widths = widths[:levels]
        self.ups = nn.ModuleList()
        self.blocks = nn.ModuleList()
        self.has_skip = []
        cur = in_ch
        for i in range(levels):
            width = widths[i]
            self.ups.append(nn.ConvTranspose2d(cur, width, 2, stride=2))
            has_skip = i < len(skip_channels) and i < levels
            self.has_skip.append(has_skip)
            block_in = width * 2 if has_skip else width
            ops = []
            for j in range(ops_per_level):
                src = block_in if j == 0 else width
                if op == "conv":
                    ops.append(_conv_bn_act(src, width))
                else:
                    ops.append(MBConv(src, width, MBConvConfig(kernel=3, expansion=3.0)))
            self.blocks.append(nn.Sequential(*ops))
            cur = width
        self.final = nn.Conv2d(cur, out_ch, 1)
        self.num_levels = levels

    def forward(self, bottleneck, skips):
        out = bottleneck
        for i, (up, block) in enumerate(zip(self.ups, self.blocks)):
            out = up(out)
            if self.has_skip[i]:
                out = block(torch.cat([out, skips[i]], dim=1))
            else:
                out = block(out)
        out = self.final(out)
        if self.final_upsample > 1:
            out = nn.functional.interpolate(
                out, scale_factor=self.final_upsample, mode="bilinear",
                align_corners=False,
            )
        return out


class CNas(nn.Module):
    """Classifier assembled from a spec: encoder stages + classifier branch."""

    task = "classify"

    def __init__(self, spec: ArchSpec, macro: MacroConfig, space, num_classes: int):
        super().__init__()
        self.spec_hash = spec.content_hash()
        self.encoder = NasEncoder(spec, macro, space)
        self.branch = ClassifierBranch(spec, macro, space, num_classes)

    def forward(self, x):
        out, _ = self.encoder(x)
        return self.branch(out)


class DNas(nn.Module):
    """Denoiser: searched encoder, fixed decoder, shape-preserving."""

    task = "denoise"

    def __init__(self, spec: ArchSpec, macro: MacroConfig, space, out_ch: int = 3,
                 **decoder_kwargs):
        super().__init__()
        self.spec_hash = spec.content_hash()
        self.encoder = NasEncoder(spec, macro, space)
        full_levels = _log2(self.encoder.out_scale)
        self.decoder = NasDecoder(
            self.encoder.out_channels, self.encoder.tap_channels, full_levels,
            out_ch=out_ch, **decoder_kwargs,
        )

    def forward(self, x):
        bottleneck, skips = self.encoder(x)
        return self.decoder(bottleneck, skips)


class DCNas(nn.Module):
    """Integrated joint model: one encoder shared by decoder and classifier."""

    task = "joint"
    arrangement = "integrated"

    def __init__(self, spec: ArchSpec, macro: MacroConfig, space, num_classes: int,
                 out_ch: int = 3, **decoder_kwargs):
        super().__init__()
        self.spec_hash = spec.content_hash()
        self.encoder = NasEncoder(spec, macro, space)
        full_levels = _log2(self.encoder.out_scale)
        self.decoder = NasDecoder(
            self.encoder.out_channels, self.encoder.tap_channels, full_levels,
            out_ch=out_ch, **decoder_kwargs,
        )
        self.branch = ClassifierBranch(spec, macro, space, num_classes)

    def forward(self, x):
        bottleneck, skips = self.encoder(x)
        denoised = self.decoder(bottleneck, skips)
        logits = self.branch(bottleneck)
        return denoised, logits

    def decoder_parameters(self):
        return self.decoder.parameters()

    def encoder_parameters(self):
        return self.encoder.parameters()


class DCNasSeq(nn.Module):
    """Sequential joint model: full denoiser, then a complete classifier.

    The classifier encoder is instantiated a second time, so classification
    gradients reach the decoder and the encoder parameters are not shared.
    """

    task = "joint"
    arrangement = "sequential"

    def __init__(self, spec: ArchSpec, macro: MacroConfig, space, num_classes: int):
        super().__init__()
        self.spec_hash = spec.content_hash()
        self.denoiser = DNas(spec, macro, space, out_ch=macro.in_ch)
        self.classifier = CNas(spec, macro, space, num_classes)

    def forward(self, x):
        denoised = self.denoiser(x)
        logits = self.classifier(denoised)
        return denoised, logits

    def decoder_parameters(self):
        return self.denoiser.decoder.parameters()


def _log2(scale: int) -> int:
    levels = 0
    while scale > 1:
        if scale % 2:
            raise ArchSpecError(f"encoder scale {scale} is not a power of two")
        scale //= 2
        levels += 1
    return levels


def _resolve(spec: ArchSpec, macro, space, seed):
    from ..search.space import get_search_space

    macro = get_macro(macro if macro is not None else spec.macro)
    space = get_search_space(space if space is not None else spec.search_space_id)
    spec.validate(space=space, macro=macro)
    if seed is not None:
        torch.manual_seed(seed)
    return macro, space


def _check_decoder_levels(macro: MacroConfig) -> None:
    distinct = len(set(macro.encoder_resolutions()))
    if distinct != 4:
        raise ArchSpecError(
            f"decoder attachment needs exactly 4 encoder resolution levels, "
            f"macro {macro.name!r} has {distinct}"
        )


def build_cnas(spec: ArchSpec, num_classes: int = 100, macro=None, space=None,
               seed=None) -> CNas:
    macro, space = _resolve(spec, macro, space, seed)
    return CNas(spec, macro, space, num_classes)


def build_dnas(spec: ArchSpec, macro=None, space=None, seed=None,
               out_ch: int | None = None) -> DNas:
    macro, space = _resolve(spec, macro, space, seed)
    _check_decoder_levels(macro)
    return DNas(spec, macro, space, out_ch=out_ch if out_ch else macro.in_ch)


def build_dcnas(spec: ArchSpec, num_classes: int = 100, macro=None, space=None,
                seed=None, **decoder_kwargs) -> DCNas:
    macro, space = _resolve(spec, macro, space, seed)
    _check_decoder_levels(macro)
    return DCNas(spec, macro, space, num_classes, out_ch=macro.in_ch,
                 **decoder_kwargs)


def build_dcnas_seq(spec_small: ArchSpec, num_classes: int = 100, macro=None,
                    space=None, seed=None) -> DCNasSeq:
    macro, space = _resolve(spec_small, macro, space, seed)
    _check_decoder_levels(macro)
    return DCNasSeq(spec_small, macro, space, num_classes)


def build_decoder_variant(base: ArchSpec, variant: str, num_classes: int = 100,
                          macro=None, space=None, seed=None) -> DCNas:
    if variant not in DECODER_VARIANTS:
        raise ArchSpecError(
            f"unknown decoder variant {variant!r}; use one of {sorted(DECODER_VARIANTS)}"
        )
    return build_dcnas(base, num_classes=num_classes, macro=macro, space=space,
                       seed=seed, **DECODER_VARIANTS[variant])
