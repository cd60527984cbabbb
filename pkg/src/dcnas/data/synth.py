"""Controlled two-digit dataset: composition, Gaussian corruption, persistence.

Each sample is a constant gray-tinted canvas with two non-overlapping digits
composited onto it.  Outside the two digit boxes every pixel equals the
background tint exactly; inside a box, pixels are ``max(background, digit)``.
Noise is additive white Gaussian, applied on the fly (the stored dataset is
clean).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..errors import DataError, PlacementError
from .corpus import DIGIT_SIZE, DigitCorpus, resolve_corpus

INDEX_VERSION = 1
PLACEMENT_ATTEMPTS = 1000
GRID_SIGMAS = tuple(round(0.1 * i, 1) for i in range(11))  # 0.0 .. 1.0

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class CleanSample:
    """One composed canvas with its digit boxes and labels."""

    canvas: np.ndarray          # (H, W) float32 in [0, 1]
    boxes: tuple                # two (top, left, height, width) int tuples
    labels: tuple               # two digit classes in 0..9
    background: float           # tint in [0.1, 0.3]


@dataclass(frozen=True)
class NoiseSpec:
    """Noise policy: a fixed grid of sigma levels or a continuous range."""

    mode: str = "grid"                      # "grid" | "uniform"
    levels: tuple = GRID_SIGMAS             # grid mode
    range: tuple = (0.0, 1.0)               # uniform mode: (lo, hi)

    def __post_init__(self):
        if self.mode not in ("grid", "uniform"):
            raise DataError(f"noise mode must be grid or uniform, got {self.mode!r}")
        if self.mode == "grid":
            levels = tuple(float(s) for s in self.levels)
            if any(s < 0 for s in levels):
                raise DataError("noise levels must be non-negative")
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise DataError("grid noise levels must be strictly increasing")
            object.__setattr__(self, "levels", levels)
        else:
            lo, hi = (float(x) for x in self.range)
            if lo < 0 or hi < lo:
                raise DataError("uniform noise range must satisfy 0 <= lo <= hi")
            object.__setattr__(self, "range", (lo, hi))

    def sample_sigma(self, rng: np.random.Generator) -> float:
        if self.mode == "grid":
            return float(self.levels[rng.integers(len(self.levels))])
        lo, hi = self.range
        return float(rng.uniform(lo, hi))


@dataclass
class DatasetManifest:
    """Everything needed to (re)build the dataset deterministically."""

    count: int = 30000
    seed: int = 0
    canvas_size: int = 64
    corpus: str = "glyph"
    out_dir: str = "data/synth"
    split_sizes: tuple = field(default=None)

    def __post_init__(self):
        if self.count < 1:
            raise DataError("sample count must be >= 1")
        if self.split_sizes is None:
            self.split_sizes = default_splits(self.count)
        self.split_sizes = tuple(int(n) for n in self.split_sizes)
        if sum(self.split_sizes) != self.count:
            raise DataError(
                f"split sizes {self.split_sizes} do not sum to count {self.count}"
            )


def default_splits(count: int) -> tuple:
    """80/10/10 split; remainders go to the test split."""
    train = int(count * 0.8)
    val = int(count * 0.1)
    return (train, val, count - train - val)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Per-sample stream, a pure function of (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence((seed, index)))


def compose_sample(
    corpus: DigitCorpus,
    rng: np.random.Generator,
    canvas_size: int = 64,
    num_digits: int = 2,
) -> CleanSample:
    """Place ``num_digits`` non-overlapping digits on a constant-tint canvas."""
    if canvas_size < DIGIT_SIZE:
        raise PlacementError(
            f"canvas {canvas_size} cannot hold a {DIGIT_SIZE}px digit"
        )
    background = float(rng.uniform(0.1, 0.3))
    canvas = np.full((canvas_size, canvas_size), background, dtype=np.float32)

    # the whole placement is rejection-sampled jointly: a lone central digit
    # can leave no disjoint spot for the second one
    limit = canvas_size - DIGIT_SIZE
    boxes = None
    for _attempt in range(PLACEMENT_ATTEMPTS):
        candidate = [
            (int(rng.integers(0, limit + 1)), int(rng.integers(0, limit + 1)),
             DIGIT_SIZE, DIGIT_SIZE)
            for _ in range(num_digits)
        ]
        if all(not _boxes_overlap(a, b)
               for i, a in enumerate(candidate) for b in candidate[i + 1:]):
            boxes = candidate
            break
    if boxes is None:
        raise PlacementError(
            f"could not place {num_digits} disjoint digits on a "
            f"{canvas_size}x{canvas_size} canvas after {PLACEMENT_ATTEMPTS} attempts"
        )

    labels = []
    for top, left, h, w in boxes:
        idx = int(rng.integers(len(corpus)))
        digit = corpus.images[idx]
        labels.append(int(corpus.labels[idx]))
        region = canvas[top : top + h, left : left + w]
        canvas[top : top + h, left : left + w] = np.maximum(region, digit)

    return CleanSample(
        canvas=canvas, boxes=tuple(boxes), labels=tuple(labels), background=background
    )


def _boxes_overlap(a, b) -> bool:
    ay, ax, ah, aw = a
    by, bx, bh, bw = b
    return not (ay + ah <= by or by + bh <= ay or ax + aw <= bx or bx + bw <= ax)


def add_gaussian_noise(
    image: np.ndarray,
    sigma: float,
    rng: np.random.Generator,
    clip: bool = True,
) -> np.ndarray:
    """Return ``image`` plus zero-mean Gaussian noise of std ``sigma``.

    The result is clipped to [0, 1] unless ``clip=False`` (diagnostics only;
    everything fed to metrics or models uses the clipped form).  The input is
    never modified.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    noisy = image + rng.normal(0.0, sigma, size=image.shape)
    noisy = noisy.astype(image.dtype, copy=False)
    if clip:
        noisy = np.clip(noisy, 0.0, 1.0)
    return noisy


def extract_digits(sample: CleanSample, image: np.ndarray):
    """Crop the two digit regions of ``image`` at the sample's ground-truth boxes.

    Returns ``(crops, labels)`` with crops shaped (num_digits, 28, 28), in box
    order.
    """
    if image.shape != sample.canvas.shape:
        raise ValueError(
            f"image shape {image.shape} does not match canvas {sample.canvas.shape}"
        )
    crops = np.stack(
        [image[t : t + h, l : l + w] for (t, l, h, w) in sample.boxes]
    )
    return crops, np.asarray(sample.labels, dtype=np.int64)


class SynthDataset:
    """In-memory view over a built dataset, split into train/val/test."""

    def __init__(self, manifest: DatasetManifest, canvases, boxes, labels, backgrounds):
        self.manifest = manifest
        self.canvases = canvases            # dict split -> (N, H, W) float32
        self.boxes = boxes                  # dict split -> (N, 2, 4) int64
        self.labels = labels                # dict split -> (N, 2) int64
        self.backgrounds = backgrounds      # dict split -> (N,) float32

    def split(self, name: str):
        return (
            self.canvases[name],
            self.boxes[name],
            self.labels[name],
            self.backgrounds[name],
        )

    def sample(self, split: str, i: int) -> CleanSample:
        return CleanSample(
            canvas=self.canvases[split][i],
            boxes=tuple(tuple(int(v) for v in b) for b in self.boxes[split][i]),
            labels=tuple(int(v) for v in self.labels[split][i]),
            background=float(self.backgrounds[split][i]),
        )

    def size(self, split: str) -> int:
        return len(self.canvases[split])


def build_dataset(manifest: DatasetManifest, corpus: DigitCorpus | None = None) -> SynthDataset:
    """Generate all samples, persist them under ``manifest.out_dir``, return the dataset.

    Layout: one ``<split>.npz`` per split with the canvases, plus ``index.json``
    carrying boxes, labels, backgrounds, the manifest, and content hashes.
    Rebuilding with the same manifest is bit-identical.
    """
    corpus = corpus if corpus is not None else resolve_corpus(manifest.corpus)
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    offsets = np.cumsum((0,) + manifest.split_sizes)
    canvases, boxes, labels, backgrounds = {}, {}, {}, {}
    manifest_record = asdict(manifest)
    manifest_record.pop("out_dir")  # storage location is not dataset identity
    index = {
        "version": INDEX_VERSION,
        "manifest": manifest_record,
        "splits": {},
    }
    for split, start, stop in zip(SPLIT_NAMES, offsets[:-1], offsets[1:]):
        n = stop - start
        cv = np.empty((n, manifest.canvas_size, manifest.canvas_size), dtype=np.float32)
        bx = np.empty((n, 2, 4), dtype=np.int64)
        lb = np.empty((n, 2), dtype=np.int64)
        bg = np.empty(n, dtype=np.float32)
        for j, global_idx in enumerate(range(start, stop)):
            s = compose_sample(
                corpus, sample_rng(manifest.seed, global_idx), manifest.canvas_size
            )
            cv[j] = s.canvas
            bx[j] = np.asarray(s.boxes)
            lb[j] = np.asarray(s.labels)
            bg[j] = s.background
        np.savez_compressed(out / f"{split}.npz", canvases=cv)
        canvases[split], boxes[split], labels[split], backgrounds[split] = cv, bx, lb, bg
        index["splits"][split] = {
            "count": int(n),
            "first_index": int(start),
            "boxes": bx.tolist(),
            "labels": lb.tolist(),
            "backgrounds": [float(v) for v in bg],
            "canvas_sha256": hashlib.sha256(cv.tobytes()).hexdigest(),
        }
    (out / "index.json").write_text(json.dumps(index, sort_keys=True))
    return SynthDataset(manifest, canvases, boxes, labels, backgrounds)


def index_hash(directory: str | Path) -> str:
    """Content hash of a built dataset's index file."""
    data = (Path(directory) / "index.json").read_bytes()
    return hashlib.sha256(data).hexdigest()


def load_dataset(directory: str | Path) -> SynthDataset:
    """Reload a persisted dataset; canvases round-trip bit-exactly."""
    directory = Path(directory)
    index_file = directory / "index.json"
    if not index_file.exists():
        raise DataError(f"no dataset index at {index_file}")
    index = json.loads(index_file.read_text())
    if index.get("version") != INDEX_VERSION:
        raise DataError(f"unsupported dataset index version {index.get('version')}")
    manifest = DatasetManifest(**index["manifest"], out_dir=str(directory))
    canvases, boxes, labels, backgrounds = {}, {}, {}, {}
    for split in SPLIT_NAMES:
        meta = index["splits"][split]
        with np.load(directory / f"{split}.npz") as arrs:
            cv = arrs["canvases"]
        if hashlib.sha256(cv.tobytes()).hexdigest() != meta["canvas_sha256"]:
            raise DataError(f"canvas data for split {split!r} does not match its index hash")
        canvases[split] = cv
        boxes[split] = np.asarray(meta["boxes"], dtype=np.int64)
        labels[split] = np.asarray(meta["labels"], dtype=np.int64)
        backgrounds[split] = np.asarray(meta["backgrounds"], dtype=np.float32)
    return SynthDataset(manifest, canvases, boxes, labels, backgrounds)
