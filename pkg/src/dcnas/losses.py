"""Training objectives and their weighted combinations.

Presets:

* ``dcnet`` — 0.1 * CE + 0.9 * Charbonnier (joint controlled models)
* ``den``   — 0.8 * Charbonnier + 0.2 * SSIM-loss (denoisers)
* ``both``  — 0.1 * CE + 0.9 * den (joint searched models)
"""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .metrics import ssim

CHARBONNIER_EPS = 1e-3
LABEL_SMOOTHING = 0.1


@dataclass(frozen=True)
class LossWeights:
    w_ce: float = 0.0
    w_char: float = 0.0
    w_ssim: float = 0.0
    w_den: float = 0.0

    def __post_init__(self):
        for name in ("w_ce", "w_char", "w_ssim", "w_den"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


PRESET_WEIGHTS = {
    "dcnet": LossWeights(w_ce=0.1, w_char=0.9),
    "den": LossWeights(w_char=0.8, w_ssim=0.2),
    "both": LossWeights(w_ce=0.1, w_den=0.9),
}


def charbonnier(pred, target, eps: float = CHARBONNIER_EPS) -> torch.Tensor:
    """Smooth-L1 restoration loss: mean of sqrt((pred - target)^2 + eps^2)."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    pred = torch.as_tensor(pred)
    target = torch.as_tensor(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    diff = pred - target
    return torch.sqrt(diff * diff + eps * eps).mean()


def ssim_loss(pred, target) -> torch.Tensor:
    """1 - SSIM, zero for a perfect reconstruction."""
    return 1.0 - ssim(pred, target)


def ce_label_smoothing(logits, labels, smoothing: float = LABEL_SMOOTHING) -> torch.Tensor:
    """Cross-entropy against a label-smoothed target distribution.

    The target is ``(1 - smoothing) * one_hot + smoothing / num_classes``.
    """
    if not 0.0 <= smoothing < 1.0:
        raise ValueError(f"smoothing must be in [0, 1), got {smoothing}")
    logits = torch.as_tensor(logits)
    labels = torch.as_tensor(labels, dtype=torch.long)
    flat = logits.reshape(-1, logits.shape[-1])
    lab = labels.reshape(-1)
    num_classes = flat.shape[-1]
    if lab.numel() and (int(lab.min()) < 0 or int(lab.max()) >= num_classes):
        raise ValueError(f"label out of range for {num_classes} classes")
    logp = torch.log_softmax(flat, dim=-1)
    nll = -logp.gather(1, lab[:, None]).squeeze(1)
    uniform = -logp.mean(dim=-1)
    return ((1.0 - smoothing) * nll + smoothing * uniform).mean()


def combined_loss(preset: str, parts: dict):
    """Weighted sum of loss parts per preset.

    ``parts`` maps ``ce`` / ``char`` / ``ssim_loss`` to scalars or 0-dim
    tensors.  Missing required parts raise ``ValueError``.
    """
    if preset not in PRESET_WEIGHTS:
        raise ValueError(f"unknown loss preset {preset!r}; use one of {sorted(PRESET_WEIGHTS)}")
    required = {
        "dcnet": ("ce", "char"),
        "den": ("char", "ssim_loss"),
        "both": ("ce", "char", "ssim_loss"),
    }[preset]
    missing = [k for k in required if k not in parts]
    if missing:
        raise ValueError(f"loss preset {preset!r} is missing parts: {missing}")
    w = PRESET_WEIGHTS[preset]
    if preset == "dcnet":
        return w.w_ce * parts["ce"] + w.w_char * parts["char"]
    if preset == "den":
        return w.w_char * parts["char"] + w.w_ssim * parts["ssim_loss"]
    den = PRESET_WEIGHTS["den"]
    inner = den.w_char * parts["char"] + den.w_ssim * parts["ssim_loss"]
    return w.w_ce * parts["ce"] + w.w_den * inner
