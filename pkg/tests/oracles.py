"""Independent reference implementations used to check the package.

Everything here is computed from first principles (configs and stated
formulas), never by calling the code paths under test.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


# ---------------------------------------------------------------- SSIM

def naive_ssim(a: np.ndarray, b: np.ndarray, window: int = 11,
               sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03) -> float:
    """Direct sliding-window SSIM over one (H, W) image pair."""
    coords = np.arange(window) - (window - 1) / 2.0
    g = np.exp(-(coords**2) / (2 * sigma * sigma))
    kernel = np.outer(g, g)
    kernel /= kernel.sum()
    c1, c2 = k1 * k1, k2 * k2
    h, w = a.shape
    vals = []
    for top in range(h - window + 1):
        for left in range(w - window + 1):
            pa = a[top : top + window, left : left + window]
            pb = b[top : top + window, left : left + window]
            mu_a = float((kernel * pa).sum())
            mu_b = float((kernel * pb).sum())
            var_a = float((kernel * pa * pa).sum()) - mu_a * mu_a
            var_b = float((kernel * pb * pb).sum()) - mu_b * mu_b
            cov = float((kernel * pa * pb).sum()) - mu_a * mu_b
            vals.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(vals))


# ---------------------------------------------------------------- FLOPs (MACs)

def _round_half_up(x: float) -> int:
    return max(1, int(math.floor(x + 0.5)))


def conv_macs(k: int, c_in: int, c_out: int, h_out: int, w_out: int,
              groups: int = 1) -> int:
    return k * k * (c_in // groups) * c_out * h_out * w_out


def conv_transpose_macs(k: int, c_in: int, c_out: int, h_in: int, w_in: int) -> int:
    return k * k * c_in * c_out * h_in * w_in


def mbconv_macs(c_in: int, c_out: int, kernel: int, expansion: float,
                se: bool, stride: int, h_in: int, w_in: int) -> tuple:
    """Returns (macs, h_out, w_out) for one inverted-residual block."""
    mid = _round_half_up(expansion * c_in)
    h_out = -(-h_in // stride)
    w_out = -(-w_in // stride)
    macs = 0
    if mid != c_in:
        macs += conv_macs(1, c_in, mid, h_in, w_in)
    macs += conv_macs(kernel, mid, mid, h_out, w_out, groups=mid)
    if se:
        reduced = max(1, mid // 4)
        macs += conv_macs(1, mid, reduced, 1, 1)
        macs += conv_macs(1, reduced, mid, 1, 1)
    macs += conv_macs(1, mid, c_out, h_out, w_out)
    return macs, h_out, w_out


def unet_macs(b: int, d: int, m: float, c: int, in_ch: int, out_ch: int,
              size: int) -> int:
    """Per-layer enumeration of the encoder-decoder denoiser."""
    widths = [_round_half_up(b * m**i) for i in range(d)]
    total = 0
    h = size
    # encoder
    prev = in_ch
    for i in range(d):
        total += conv_macs(3, prev, widths[i], h, h)
        for _ in range(c - 1):
            total += conv_macs(3, widths[i], widths[i], h, h)
        prev = widths[i]
        if i < d - 1:
            h //= 2
    # decoder
    for i in reversed(range(d - 1)):
        total += conv_transpose_macs(2, widths[i + 1], widths[i], h, h)
        h *= 2
        total += conv_macs(3, 2 * widths[i], widths[i], h, h)
        for _ in range(c - 1):
            total += conv_macs(3, widths[i], widths[i], h, h)
    total += conv_macs(1, widths[0], out_ch, h, h)
    return total


def manual_classifier_macs(kind: str, expansion: float | None,
                           width_scale: float, num_classes: int = 10) -> int:
    w1 = _round_half_up(32 * width_scale)
    w2 = _round_half_up(64 * width_scale)
    total = conv_macs(3, 1, w1, 28, 28)          # stage 1 conv before pooling
    if kind == "conv":
        total += conv_macs(3, w1, w2, 14, 14)    # stage 2 conv at pooled size
    else:
        macs, _, _ = mbconv_macs(w1, w2, 3, expansion, False, 1, 14, 14)
        total += macs
    total += w2 * num_classes                    # linear head
    return total


CNAS_WIDTHS = (16, 24, 40, 80, 112, 112, 192, 320)
CNAS_BLOCKS = (1, 2, 2, 3, 3, 2, 2, 1)
CNAS_STRIDES = (1, 2, 2, 2, 1, 1, 2, 1)
CNAS_SEARCHABLE = (False, True, True, True, True, True, True, True)
SIZE8 = (  # (kernel, expansion, se) in search-space order
    (3, 3.0, False), (3, 6.0, False), (5, 3.0, False), (5, 6.0, False),
    (3, 3.0, True), (3, 6.0, True), (5, 3.0, True), (5, 6.0, True),
)


def dcnas_macs(choices, width_factor: float, num_classes: int = 100,
               size: int = 224) -> int:
    """Enumerated cost of the integrated searched model at a width factor."""
    widths = [_round_half_up(w * width_factor) for w in CNAS_WIDTHS]
    stem_ch = _round_half_up(16 * width_factor)
    head_ch = _round_half_up(1280 * width_factor)
    h = size // 2
    total = conv_macs(3, 3, stem_ch, h, h)  # stem, stride 2

    pos = 0
    c_in = stem_ch
    taps = {}  # resolution -> channels at the last stage producing it
    enc_out_ch, enc_out_h = None, None
    for s_idx in range(8):
        for b_idx in range(CNAS_BLOCKS[s_idx]):
            stride = CNAS_STRIDES[s_idx] if b_idx == 0 else 1
            if CNAS_SEARCHABLE[s_idx]:
                k, e, se = SIZE8[choices[pos]]
                pos += 1
            else:
                k, e, se = 3, 1.0, False
            macs, h, _ = mbconv_macs(c_in, widths[s_idx], k, e, se, stride, h, h)
            total += macs
            c_in = widths[s_idx]
        if s_idx < 6:
            taps[h] = widths[s_idx]
            if s_idx == 5:
                enc_out_ch, enc_out_h = widths[s_idx], h

    # decoder: skips at the resolutions shallower than the encoder output
    skip_res = sorted((r for r in taps if r > enc_out_h))
    skip_channels = [taps[r] for r in skip_res]  # deepest first by construction
    cur_ch, cur_h = enc_out_ch, enc_out_h
    for level in range(4):
        width = skip_channels[level] if level < len(skip_channels) \
            else skip_channels[-1]
        total += conv_transpose_macs(2, cur_ch, width, cur_h, cur_h)
        cur_h *= 2
        block_in = width * 2 if level < len(skip_channels) else width
        total += conv_macs(3, block_in, width, cur_h, cur_h)
        total += conv_macs(3, width, width, cur_h, cur_h)
        cur_ch = width
    total += conv_macs(1, cur_ch, 3, cur_h, cur_h)

    total += conv_macs(1, c_in, head_ch, h, h)   # classifier 1x1 before pooling
    total += head_ch * num_classes               # linear
    return total


# ---------------------------------------------------------------- latency

def brute_force_expected_latency(weight_rows, entry_rows, overhead: float) -> float:
    """Expectation over the product distribution by explicit enumeration."""
    total = 0.0
    for combo in itertools.product(*[range(len(r)) for r in weight_rows]):
        prob = 1.0
        lat = overhead
        for layer, choice in enumerate(combo):
            prob *= weight_rows[layer][choice]
            lat += entry_rows[layer][choice]
        total += prob * lat
    return total
