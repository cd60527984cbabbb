"""Analytic FLOPs accounting via shape-capturing forward hooks.

Counted: convolutions (dense, depthwise, transposed), linear layers, and the
squeeze-excitation reductions.  Ignored: normalization, activations, pooling.
The MACs-to-FLOPs factor is explicit and recorded in every report, since
published numbers are ambiguous about it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from ..errors import FlopsError
from ..models.blocks import SqueezeExcite

COUNTED_KINDS = ("conv", "depthwise_conv", "transposed_conv", "linear", "se_reduction")
IGNORED_KINDS = ("norm", "activation", "pooling")


@dataclass(frozen=True)
class FlopsConvention:
    macs_to_flops: int = 2
    counted: tuple = COUNTED_KINDS
    ignored: tuple = IGNORED_KINDS

    def __post_init__(self):
        if self.macs_to_flops not in (1, 2):
            raise FlopsError(f"macs_to_flops must be 1 or 2, got {self.macs_to_flops}")


DEFAULT_CONVENTION = FlopsConvention()


@dataclass
class FlopsReport:
    flops: int
    macs: int
    convention: FlopsConvention
    input_shape: tuple
    per_layer: list = field(default_factory=list)  # (name, kind, macs)

    def by_kind(self) -> dict:
        out = {}
        for _, kind, macs in self.per_layer:
            out[kind] = out.get(kind, 0) + macs
        return out


def _conv_macs(module: nn.Conv2d, output: torch.Tensor) -> int:
    kh, kw = module.kernel_size
    h_out, w_out = output.shape[-2:]
    batch = output.shape[0]
    cin_per_group = module.in_channels // module.groups
    return kh * kw * cin_per_group * module.out_channels * h_out * w_out * batch


def _conv_transpose_macs(module: nn.ConvTranspose2d, inp: torch.Tensor) -> int:
    kh, kw = module.kernel_size
    h_in, w_in = inp.shape[-2:]
    batch = inp.shape[0]
    cout_per_group = module.out_channels // module.groups
    return kh * kw * module.in_channels * cout_per_group * h_in * w_in * batch


def _linear_macs(module: nn.Linear, inp: torch.Tensor) -> int:
    rows = inp.numel() // inp.shape[-1]
    return rows * module.in_features * module.out_features


def count_flops(model: nn.Module, input_shape, convention: FlopsConvention = DEFAULT_CONVENTION,
                forward_args: tuple = ()) -> FlopsReport:
    """Run one dummy forward and sum analytic costs of the counted ops.

    ``input_shape`` includes the batch dimension, e.g. ``(1, 3, 224, 224)``.
    Extra positional inputs (ground-truth boxes for crop-mode joint models)
    go in ``forward_args``.
    """
    se_members = set()
    for module in model.modules():
        if isinstance(module, SqueezeExcite):
            for sub in module.modules():
                if isinstance(sub, nn.Conv2d):
                    se_members.add(id(sub))

    per_layer = []
    handles = []

    def hook(name):
        def fn(module, inputs, output):
            inp = inputs[0]
            if isinstance(module, nn.ConvTranspose2d):
                macs = _conv_transpose_macs(module, inp)
                kind = "transposed_conv"
            elif isinstance(module, nn.Conv2d):
                macs = _conv_macs(module, output)
                if id(module) in se_members:
                    kind = "se_reduction"
                elif module.groups > 1 and module.groups == module.in_channels:
                    kind = "depthwise_conv"
                else:
                    kind = "conv"
            elif isinstance(module, nn.Linear):
                macs = _linear_macs(module, inp)
                kind = "linear"
            else:
                return
            per_layer.append((name, kind, macs))
        return fn

    for name, module in model.named_modules():
        if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            handles.append(module.register_forward_hook(hook(name)))

    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            dummy = torch.zeros(*input_shape)
            model(dummy, *forward_args)
    except Exception as exc:
        raise FlopsError(
            f"could not resolve shapes for input {tuple(input_shape)}: {exc}"
        ) from exc
    finally:
        for h in handles:
            h.remove()
        model.train(was_training)

    macs = sum(m for _, _, m in per_layer)
    return FlopsReport(
        flops=macs * convention.macs_to_flops,
        macs=macs,
        convention=convention,
        input_shape=tuple(input_shape),
        per_layer=per_layer,
    )
