"""Manual digit classifiers for the controlled study.

Two conv stages (the second optionally an MBConv), global max pooling, and a
linear layer.  Size presets S/M/L scale the stage widths; expansion-rate
presets follow the naming scheme ``conv-<size>`` / ``mb<e>-<size>``.
"""
from __future__ import annotations

import torch.nn as nn

from ..errors import ArchSpecError
from .blocks import MBConv, MBConvConfig, group_norm, round_half_up

BASE_WIDTHS = (32, 64)
WIDTH_SCALES = {"s": 0.5, "m": 0.75, "l": 1.0}

# name -> (kind, expansion, width_scale)
CLASSIFIER_PRESETS = {
    "conv-s": ("conv", None, WIDTH_SCALES["s"]),
    "conv-m": ("conv", None, WIDTH_SCALES["m"]),
    "conv-l": ("conv", None, WIDTH_SCALES["l"]),
    "mb1-s": ("mbconv", 1.0, WIDTH_SCALES["s"]),
    "mb2.5-s": ("mbconv", 2.5, WIDTH_SCALES["s"]),
    "mb2.5-m": ("mbconv", 2.5, WIDTH_SCALES["m"]),
    "mb4-s": ("mbconv", 4.0, WIDTH_SCALES["s"]),
    "mb4-l": ("mbconv", 4.0, WIDTH_SCALES["l"]),
}


def _conv_stage(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1),
        group_norm(out_ch),
        nn.MaxPool2d(2),
        nn.ReLU(inplace=True),
    )


class DigitClassifier(nn.Module):
    """28x28 grayscale crop -> 10-class logits."""

    task = "classify"

    def __init__(self, kind: str, expansion: float | None = None,
                 width_scale: float = 1.0, in_ch: int = 1, num_classes: int = 10):
        super().__init__()
        if kind not in ("conv", "mbconv"):
            raise ArchSpecError(f"unknown classifier kind {kind!r}")
        w1 = round_half_up(BASE_WIDTHS[0] * width_scale)
        w2 = round_half_up(BASE_WIDTHS[1] * width_scale)
        self.layer1 = _conv_stage(in_ch, w1)
        if kind == "conv":
            self.layer2 = _conv_stage(w1, w2)
        else:
            if expansion is None:
                raise ArchSpecError("mbconv classifier needs an expansion rate")
            self.layer2 = nn.Sequential(
                MBConv(w1, w2, MBConvConfig(kernel=3, expansion=expansion)),
                nn.MaxPool2d(2),
            )
        self.pool = nn.AdaptiveMaxPool2d(1)
        self.fc = nn.Linear(w2, num_classes)

    def forward(self, x):
        out = self.layer2(self.layer1(x))
        out = self.pool(out).flatten(1)
        return self.fc(out)


def make_manual_classifier(kind: str, expansion: float | None = None,
                           width_scale: float = 1.0, in_ch: int = 1,
                           num_classes: int = 10) -> DigitClassifier:
    return DigitClassifier(kind, expansion, width_scale, in_ch=in_ch,
                           num_classes=num_classes)


def classifier_preset(name: str, in_ch: int = 1, num_classes: int = 10) -> DigitClassifier:
    key = name.lower()
    if key not in CLASSIFIER_PRESETS:
        raise ArchSpecError(
            f"unknown classifier preset {name!r}; use one of {sorted(CLASSIFIER_PRESETS)}"
        )
    kind, expansion, scale = CLASSIFIER_PRESETS[key]
    return make_manual_classifier(kind, expansion, scale, in_ch=in_ch,
                                  num_classes=num_classes)
