"""Image-folder pipeline for 100-class noisy classification at 224x224.

Expects ``root/<class_name>/*.{jpg,jpeg,png}``; the class list fixes the
label order.  Training iteration yields random crops with horizontal flips;
evaluation uses center crops.  Noise is added after scaling to [0, 1] and the
result is clipped.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ..data.synth import NoiseSpec, add_gaussian_noise
from ..errors import DataError

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp")


class ImageFolderData:
    """Lazy image-folder dataset with crop/flip/noise transforms."""

    def __init__(self, root, class_list, crop: int = 224,
                 noise: NoiseSpec | None = None, seed: int = 0):
        self.root = Path(root)
        self.classes = list(class_list)
        self.crop = crop
        self.noise = noise
        self.seed = seed
        missing = [c for c in self.classes if not (self.root / c).is_dir()]
        if missing:
            raise DataError(f"missing class directories under {self.root}: {missing}")
        self.files = []
        for label, cls in enumerate(self.classes):
            entries = sorted(
                p for p in (self.root / cls).iterdir()
                if p.suffix.lower() in IMAGE_EXTENSIONS
            )
            if not entries:
                raise DataError(f"class directory {self.root / cls} holds no images")
            self.files.extend((p, label) for p in entries)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def __len__(self) -> int:
        return len(self.files)

    def _load(self, idx: int) -> np.ndarray:
        path, _ = self.files[idx]
        with Image.open(path) as img:
            img = img.convert("RGB")
            w, h = img.size
            if min(w, h) < self.crop:
                scale = self.crop / min(w, h)
                img = img.resize((max(self.crop, round(w * scale)),
                                  max(self.crop, round(h * scale))),
                                 Image.BILINEAR)
            arr = np.asarray(img, dtype=np.float32) / 255.0
        return arr.transpose(2, 0, 1)  # (C, H, W)

    def _random_crop(self, arr: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        _, h, w = arr.shape
        top = int(rng.integers(0, h - self.crop + 1))
        left = int(rng.integers(0, w - self.crop + 1))
        out = arr[:, top : top + self.crop, left : left + self.crop]
        if rng.random() < 0.5:
            out = out[:, :, ::-1]
        return np.ascontiguousarray(out)

    def _center_crop(self, arr: np.ndarray) -> np.ndarray:
        _, h, w = arr.shape
        top = (h - self.crop) // 2
        left = (w - self.crop) // 2
        return np.ascontiguousarray(
            arr[:, top : top + self.crop, left : left + self.crop])

    def train_batches(self, epoch: int, batch_size: int):
        """Random crop + flip + per-sample noise; order derives from (seed, epoch)."""
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, 1, epoch)))
        order = rng.permutation(len(self.files))
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            clean, noisy, labels = [], [], []
            for i in idx:
                arr = self._random_crop(self._load(int(i)), rng)
                clean.append(arr)
                if self.noise is not None:
                    sigma = self.noise.sample_sigma(rng)
                    noisy.append(add_gaussian_noise(arr, sigma, rng))
                labels.append(self.files[int(i)][1])
            clean_t = torch.from_numpy(np.stack(clean))
            labels_t = torch.tensor(labels, dtype=torch.long)
            if self.noise is not None:
                yield torch.from_numpy(np.stack(noisy)), clean_t, labels_t
            else:
                yield clean_t, clean_t, labels_t

    def eval_batches(self, sigma: float, batch_size: int, sigma_idx: int = 0):
        """Center crops with (sample, sigma, seed)-deterministic corruption."""
        for start in range(0, len(self.files), batch_size):
            idx = range(start, min(start + batch_size, len(self.files)))
            clean, noisy, labels = [], [], []
            for i in idx:
                arr = self._center_crop(self._load(i))
                clean.append(arr)
                rng = np.random.default_rng(
                    np.random.SeedSequence((self.seed, i, sigma_idx)))
                noisy.append(add_gaussian_noise(arr, sigma, rng))
                labels.append(self.files[i][1])
            yield (torch.from_numpy(np.stack(noisy)),
                   torch.from_numpy(np.stack(clean)),
                   torch.tensor(labels, dtype=torch.long))


def imagenet100_pipeline(root, class_list, crop: int = 224,
                         noise: NoiseSpec | None = None,
                         seed: int = 0) -> ImageFolderData:
    """Build the 100-class pipeline; raises if any listed class is missing."""
    return ImageFolderData(root, class_list, crop=crop, noise=noise, seed=seed)
