"""Joint denoise+classify heads: the two ways of attaching a classifier.

* Sequential — the classifier consumes the denoised image (digit crops in
  controlled mode), so classification gradients flow through the whole
  denoiser.
* Integrated — the classifier branch reads the shared encoder bottleneck;
  the decoder receives only the denoising gradient.

In controlled (crop) mode both variants return per-digit logits taken at the
ground-truth boxes; in image mode the classifier consumes the full image.
"""
from __future__ import annotations

import torch
import torch.nn as nn

from ..data.corpus import DIGIT_SIZE
from ..errors import ArchSpecError
from .blocks import MBConv, MBConvConfig, group_norm, round_half_up
from .unet import UNet


def crop_image_boxes(images: torch.Tensor, boxes: torch.Tensor) -> torch.Tensor:
    """Slice per-sample digit boxes out of (B, C, H, W) images.

    ``boxes`` is (B, K, 4) int (top, left, height, width) with equal sizes.
    Returns (B, K, C, h, w); differentiable w.r.t. ``images``.
    """
    b, k = boxes.shape[0], boxes.shape[1]
    h, w = int(boxes[0, 0, 2]), int(boxes[0, 0, 3])
    crops = []
    for i in range(b):
        for j in range(k):
            top, left = int(boxes[i, j, 0]), int(boxes[i, j, 1])
            crops.append(images[i, :, top : top + h, left : left + w])
    return torch.stack(crops).view(b, k, images.shape[1], h, w)


def crop_feature_boxes(features: torch.Tensor, boxes: torch.Tensor, stride: int) -> torch.Tensor:
    """Crop the feature-map cells covering each digit box.

    The window is ceil(28 / stride) cells, anchored at the box corner in
    feature coordinates and clamped inside the map.  Pure slicing, so the
    encoder stays differentiable while the decoder is untouched.
    """
    win = -(-DIGIT_SIZE // stride)
    b, k = boxes.shape[0], boxes.shape[1]
    hf, wf = features.shape[-2:]
    if hf < win or wf < win:
        raise ArchSpecError(
            f"feature map {hf}x{wf} smaller than the {win}x{win} crop window"
        )
    crops = []
    for i in range(b):
        for j in range(k):
            r = min(int(boxes[i, j, 0]) // stride, hf - win)
            c = min(int(boxes[i, j, 1]) // stride, wf - win)
            crops.append(features[i, :, r : r + win, c : c + win])
    return torch.stack(crops).view(b, k, features.shape[1], win, win)


class FeatureDigitHead(nn.Module):
    """Per-digit classifier head over cropped encoder features."""

    def __init__(self, in_ch: int, kind: str = "mbconv", expansion: float = 2.5,
                 width_scale: float = 0.75, num_classes: int = 10):
        super().__init__()
        width = round_half_up(64 * width_scale)
        if kind == "conv":
            self.block = nn.Sequential(
                nn.Conv2d(in_ch, width, 3, padding=1),
                group_norm(width),
                nn.ReLU(inplace=True),
            )
        elif kind == "mbconv":
            self.block = MBConv(in_ch, width, MBConvConfig(kernel=3, expansion=expansion))
        else:
            raise ArchSpecError(f"unknown head kind {kind!r}")
        self.pool = nn.AdaptiveMaxPool2d(1)
        self.fc = nn.Linear(width, num_classes)

    def forward(self, x):
        out = self.pool(self.block(x)).flatten(1)
        return self.fc(out)


class SequentialJoint(nn.Module):
    """Denoiser followed by a classifier on its output."""

    task = "joint"
    arrangement = "sequential"

    def __init__(self, denoiser: nn.Module, classifier: nn.Module, crop_mode: bool = True):
        super().__init__()
        self.denoiser = denoiser
        self.classifier = classifier
        self.crop_mode = crop_mode

    def forward(self, x, boxes=None):
        denoised = self.denoiser(x)
        if self.crop_mode:
            if boxes is None:
                raise ValueError("crop mode requires ground-truth boxes")
            crops = crop_image_boxes(denoised, boxes)
            b, k = crops.shape[0], crops.shape[1]
            logits = self.classifier(crops.reshape(b * k, *crops.shape[2:]))
            logits = logits.view(b, k, -1)
        else:
            logits = self.classifier(denoised)
        return denoised, logits


class IntegratedJoint(nn.Module):
    """Shared encoder feeding both the decoder and a classification head."""

    task = "joint"
    arrangement = "integrated"

    def __init__(self, unet: UNet, head: nn.Module, crop_mode: bool = True):
        super().__init__()
        self.unet = unet
        self.head = head
        self.crop_mode = crop_mode

    def forward(self, x, boxes=None):
        bottleneck, skips = self.unet.encode(x)
        denoised = self.unet.decode(bottleneck, skips)
        if self.crop_mode:
            if boxes is None:
                raise ValueError("crop mode requires ground-truth boxes")
            feats = crop_feature_boxes(bottleneck, boxes, self.unet.bottleneck_stride)
            b, k = feats.shape[0], feats.shape[1]
            logits = self.head(feats.reshape(b * k, *feats.shape[2:]))
            logits = logits.view(b, k, -1)
        else:
            logits = self.head(bottleneck)
        return denoised, logits

    def decoder_parameters(self):
        for module in (self.unet.up, self.unet.dec, self.unet.final):
            yield from module.parameters()

    def encoder_parameters(self):
        yield from self.unet.enc.parameters()


def join_sequential(denoiser: nn.Module, classifier: nn.Module,
                    crop_mode: bool = True) -> SequentialJoint:
    return SequentialJoint(denoiser, classifier, crop_mode=crop_mode)


def join_integrated(unet: UNet, head: nn.Module | None = None,
                    crop_mode: bool = True, head_kind: str = "mbconv",
                    head_expansion: float = 2.5, head_width_scale: float = 0.75,
                    num_classes: int = 10) -> IntegratedJoint:
    if head is None:
        head = FeatureDigitHead(unet.bottleneck_channels, kind=head_kind,
                                expansion=head_expansion,
                                width_scale=head_width_scale,
                                num_classes=num_classes)
    return IntegratedJoint(unet, head, crop_mode=crop_mode)
