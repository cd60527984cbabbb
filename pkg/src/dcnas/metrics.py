"""Evaluation metrics: PSNR, SSIM, classification accuracy.

All metrics assume images normalized to [0, 1] (``max_val = 1``).  PSNR of a
perfect reconstruction returns ``float("inf")`` as the documented sentinel.
"""
from __future__ import annotations

import math

import numpy as np
import torch

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(pred, target, max_val: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB: ``10 log10(max_val^2 / MSE)``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    mse = float(np.mean((pred - target) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / mse)


def _gaussian_window(size: int, sigma: float, dtype, device) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype, device=device) - (size - 1) / 2.0
    g = torch.exp(-(coords**2) / (2.0 * sigma * sigma))
    kernel = torch.outer(g, g)
    return kernel / kernel.sum()


def _as_nchw(x) -> torch.Tensor:
    t = torch.as_tensor(x)
    if t.ndim == 2:
        t = t[None, None]
    elif t.ndim == 3:
        t = t[None]
    elif t.ndim != 4:
        raise ValueError(f"expected 2-4 dims, got shape {tuple(t.shape)}")
    return t


def ssim(pred, target) -> torch.Tensor:
    """Mean local structural similarity with an 11x11 Gaussian window.

    Accepts (H, W), (C, H, W), or (B, C, H, W) arrays/tensors; differentiable
    when given torch tensors.  Returns a 0-dim tensor in [-1, 1].
    """
    p = _as_nchw(pred)
    t = _as_nchw(target)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {tuple(p.shape)} vs {tuple(t.shape)}")
    if not p.dtype.is_floating_point:
        p = p.float()
        t = t.float()
    h, w = p.shape[-2:]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(
            f"image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    channels = p.shape[1]
    kernel = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA, p.dtype, p.device)
    kernel = kernel.expand(channels, 1, SSIM_WINDOW, SSIM_WINDOW)

    def filt(x):
        return torch.nn.functional.conv2d(x, kernel, groups=channels)

    mu_p = filt(p)
    mu_t = filt(t)
    var_p = filt(p * p) - mu_p * mu_p
    var_t = filt(t * t) - mu_t * mu_t
    cov = filt(p * t) - mu_p * mu_t

    c1 = SSIM_K1**2  # L = 1
    c2 = SSIM_K2**2
    num = (2 * mu_p * mu_t + c1) * (2 * cov + c2)
    den = (mu_p * mu_p + mu_t * mu_t + c1) * (var_p + var_t + c2)
    return (num / den).mean()


def accuracy(logits, labels) -> float:
    """Top-1 accuracy in percent; argmax ties resolve to the lowest index."""
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.ndim < 2:
        raise ValueError("logits must be at least 2-D (batch, classes)")
    flat = logits.reshape(-1, logits.shape[-1])
    lab = labels.reshape(-1)
    if flat.shape[0] != lab.shape[0]:
        raise ValueError(
            f"{flat.shape[0]} logit rows vs {lab.shape[0]} labels"
        )
    if flat.shape[0] == 0:
        raise ValueError("empty batch")
    pred = np.argmax(flat, axis=1)
    return 100.0 * float(np.mean(pred == lab))
