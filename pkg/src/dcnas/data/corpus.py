"""Digit corpora: sources of 28x28 grayscale digit images with labels.

Two corpora are supported:

* ``mnist:<dir>`` — the standard IDX files (``train-images-idx3-ubyte`` /
  ``train-labels-idx1-ubyte``, optionally gzipped) read from a local
  directory.  Nothing is downloaded.
* ``glyph`` — a procedural fallback rendered from a 5x7 stroke font with
  per-sample jitter, so the full pipeline runs on machines without the
  MNIST files.

Both yield float32 images in [0, 1].
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError

DIGIT_SIZE = 28

# 5x7 bitmaps, one row string per scanline, MSB left.
_GLYPH_ROWS = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    3: ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}

_BLUR = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]) / 16.0


@dataclass(frozen=True)
class DigitCorpus:
    """Immutable bank of digit images with labels."""

    name: str
    images: np.ndarray  # (N, 28, 28) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64 in 0..9

    def __post_init__(self):
        if self.images.ndim != 3 or self.images.shape[1:] != (DIGIT_SIZE, DIGIT_SIZE):
            raise DataError(f"corpus images must be (N, 28, 28), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise DataError("corpus images and labels differ in length")

    def __len__(self):
        return len(self.images)


def _blur(img: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="constant")
    out = np.zeros_like(img)
    for dy in range(3):
        for dx in range(3):
            out += _BLUR[dy, dx] * padded[dy : dy + img.shape[0], dx : dx + img.shape[1]]
    return out


def _render_glyph(digit: int, rng: np.random.Generator) -> np.ndarray:
    rows = _GLYPH_ROWS[digit]
    bitmap = np.array([[int(ch) for ch in row] for row in rows], dtype=np.float32)
    # 5x7 -> 20x21 coarse strokes, jittered into the 28x28 frame
    glyph = np.kron(bitmap, np.ones((3, 4), dtype=np.float32))  # (21, 20)
    canvas = np.zeros((DIGIT_SIZE, DIGIT_SIZE), dtype=np.float32)
    top = int(rng.integers(0, DIGIT_SIZE - glyph.shape[0] + 1))
    left = int(rng.integers(0, DIGIT_SIZE - glyph.shape[1] + 1))
    canvas[top : top + glyph.shape[0], left : left + glyph.shape[1]] = glyph
    canvas = _blur(canvas)
    canvas *= float(rng.uniform(0.75, 1.0))
    return np.clip(canvas, 0.0, 1.0).astype(np.float32)


def make_glyph_corpus(per_class: int = 200, seed: int = 0) -> DigitCorpus:
    """Render a deterministic procedural corpus of ``10 * per_class`` digits."""
    rng = np.random.default_rng(np.random.SeedSequence((0x61797068, seed)))
    images = np.empty((10 * per_class, DIGIT_SIZE, DIGIT_SIZE), dtype=np.float32)
    labels = np.empty(10 * per_class, dtype=np.int64)
    i = 0
    for digit in range(10):
        for _ in range(per_class):
            images[i] = _render_glyph(digit, rng)
            labels[i] = digit
            i += 1
    return DigitCorpus(name="glyph", images=images, labels=labels)


def _read_idx(path: Path) -> np.ndarray:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        magic = struct.unpack(">I", fh.read(4))[0]
        ndim = magic & 0xFF
        dims = struct.unpack(">" + "I" * ndim, fh.read(4 * ndim))
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    return data.reshape(dims)


def load_mnist_corpus(directory: str | Path) -> DigitCorpus:
    """Load digits from IDX files in ``directory`` (train split)."""
    directory = Path(directory)
    images_file = None
    labels_file = None
    for suffix in ("", ".gz"):
        img = directory / f"train-images-idx3-ubyte{suffix}"
        lab = directory / f"train-labels-idx1-ubyte{suffix}"
        if img.exists() and lab.exists():
            images_file, labels_file = img, lab
            break
    if images_file is None:
        raise DataError(f"no MNIST IDX files found under {directory}")
    images = _read_idx(images_file).astype(np.float32) / 255.0
    labels = _read_idx(labels_file).astype(np.int64)
    return DigitCorpus(name=f"mnist:{directory}", images=images, labels=labels)


def resolve_corpus(identifier: str) -> DigitCorpus:
    """Resolve a corpus identifier from a dataset manifest."""
    if identifier == "glyph":
        return make_glyph_corpus()
    if identifier.startswith("glyph:"):
        per_class = int(identifier.split(":", 1)[1])
        return make_glyph_corpus(per_class=per_class)
    if identifier.startswith("mnist:"):
        return load_mnist_corpus(identifier.split(":", 1)[1])
    raise DataError(f"unknown digit corpus identifier: {identifier!r}")
