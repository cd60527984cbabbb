"""Training loops for controlled and search-derived models.

Controlled regime: Adam at 1e-3 with a reduce-on-plateau schedule for 100
epochs; every sample gets one noise level per epoch drawn from the grid, so a
single model covers the whole sigma range.  Search-derived regime: SGD with
momentum at 2e-1 under cosine decay for 250 epochs.

All corruption draws derive from (seed, epoch), so a resumed run reproduces
the exact batches and losses of an uninterrupted one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from ..data.synth import NoiseSpec, SynthDataset
from ..errors import DcnasError, TrainingDiverged
from ..losses import ce_label_smoothing, charbonnier, combined_loss, ssim_loss
from .imagenet import ImageFolderData

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    regime: str = "controlled"            # "controlled" | "nas-derived"
    optimizer: str = "adam"               # "adam" | "sgd"
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0
    scheduler: str = "plateau"            # "plateau" | "cosine" | "none"
    plateau_factor: float = 0.5
    plateau_patience: int = 5
    min_lr: float = 1e-6
    epochs: int = 100
    batch_size: int = 128
    loss: str = "auto"                    # auto | charbonnier | ce | dcnet | den | both
    label_smoothing: float = 0.1
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    checkpoint_every: int = 0             # 0: only the final checkpoint
    max_samples: int | None = None        # subset cap, for smoke runs
    out_dir: str = "runs/train"

    @classmethod
    def controlled(cls, **overrides) -> "TrainConfig":
        return cls(**{**dict(regime="controlled", optimizer="adam", lr=1e-3,
                             scheduler="plateau", epochs=100), **overrides})

    @classmethod
    def nas_derived(cls, **overrides) -> "TrainConfig":
        return cls(**{**dict(regime="nas-derived", optimizer="sgd", lr=2e-1,
                             momentum=0.9, weight_decay=1e-4,
                             scheduler="cosine", epochs=250), **overrides})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise"] = {"mode": self.noise.mode, "levels": list(self.noise.levels),
                      "range": list(self.noise.range)}
        return d


@dataclass
class TrainResult:
    checkpoint_path: str
    history: list


def _resolve_loss(model, cfg: TrainConfig) -> str:
    if cfg.loss != "auto":
        return cfg.loss
    task = getattr(model, "task", None)
    defaults = {"denoise": "charbonnier", "classify": "ce", "joint": "dcnet"}
    if task not in defaults:
        raise DcnasError(f"cannot infer a loss for model task {task!r}")
    return defaults[task]


def _check_compat(model, loss: str) -> None:
    task = getattr(model, "task", None)
    allowed = {
        "denoise": {"charbonnier", "den"},
        "classify": {"ce"},
        "joint": {"dcnet", "both"},
    }.get(task, set())
    if loss not in allowed:
        raise DcnasError(
            f"loss preset {loss!r} is incompatible with model task {task!r}"
        )


def _crop_batch(canvases: torch.Tensor, boxes: np.ndarray):
    b = canvases.shape[0]
    crops = []
    for i in range(b):
        for t, l, h, w in boxes[i]:
            crops.append(canvases[i, :, t : t + h, l : l + w])
    return torch.stack(crops)


def _batch_loss(model, loss_name: str, noisy, clean, boxes, labels,
                smoothing: float):
    task = getattr(model, "task", None)
    labels_t = torch.as_tensor(np.asarray(labels).reshape(-1))
    if task == "denoise":
        den = model(noisy)
        if loss_name == "charbonnier":
            return charbonnier(den, clean)
        return combined_loss("den", {"char": charbonnier(den, clean),
                                     "ssim_loss": ssim_loss(den, clean)})
    if task == "classify":
        # controlled data classifies ground-truth crops; image data the image
        inputs = noisy if boxes is None else _crop_batch(noisy, boxes)
        logits = model(inputs)
        return ce_label_smoothing(logits, labels_t, smoothing=smoothing)
    # joint
    if getattr(model, "crop_mode", False):
        den, logits = model(noisy, torch.as_tensor(boxes))
    else:
        den, logits = model(noisy)
    ce = ce_label_smoothing(logits.reshape(-1, logits.shape[-1]), labels_t,
                            smoothing=smoothing if loss_name == "both" else 0.0)
    parts = {"ce": ce, "char": charbonnier(den, clean)}
    if loss_name == "both":
        parts["ssim_loss"] = ssim_loss(den, clean)
    return combined_loss(loss_name, parts)


def _epoch_batches(dataset: SynthDataset, split: str, cfg: TrainConfig,
                   epoch: int, shuffle: bool):
    """Yield (noisy, clean, boxes, labels) with (seed, epoch)-derived draws."""
    tag = {"train": 1, "val": 2, "test": 3}[split]
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, tag, epoch)))
    canvases, boxes, labels, _ = dataset.split(split)
    n = len(canvases)
    if cfg.max_samples is not None:
        n = min(n, cfg.max_samples)
    order = rng.permutation(n) if shuffle else np.arange(n)
    sigmas = np.array([cfg.noise.sample_sigma(rng) for _ in range(n)])
    for start in range(0, n, cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        clean = canvases[idx][:, None]  # (B, 1, H, W)
        noise = rng.normal(0.0, 1.0, size=clean.shape) * sigmas[idx][:, None, None, None]
        noisy = np.clip(clean + noise, 0.0, 1.0).astype(np.float32)
        yield (torch.from_numpy(noisy), torch.from_numpy(clean),
               boxes[idx], labels[idx])


def _folder_batches(data: ImageFolderData, cfg: TrainConfig, epoch: int):
    """Image-folder stream: crops/flips/noise come seeded from (seed, epoch)."""
    seen = 0
    for noisy, clean, labels in data.train_batches(epoch, cfg.batch_size):
        if cfg.max_samples is not None and seen >= cfg.max_samples:
            return
        seen += noisy.shape[0]
        yield noisy, clean, None, labels.numpy()


def _make_optimizer(model, cfg: TrainConfig):
    params = [p for p in model.parameters() if p.requires_grad]
    if cfg.optimizer == "adam":
        return torch.optim.Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    if cfg.optimizer == "sgd":
        return torch.optim.SGD(params, lr=cfg.lr, momentum=cfg.momentum,
                               weight_decay=cfg.weight_decay)
    raise DcnasError(f"unknown optimizer {cfg.optimizer!r}")


def _make_scheduler(optimizer, cfg: TrainConfig):
    if cfg.scheduler == "plateau":
        return torch.optim.lr_scheduler.ReduceLROnPlateau(
            optimizer, factor=cfg.plateau_factor, patience=cfg.plateau_patience,
            min_lr=cfg.min_lr)
    if cfg.scheduler == "cosine":
        return torch.optim.lr_scheduler.CosineAnnealingLR(
            optimizer, T_max=cfg.epochs, eta_min=cfg.min_lr)
    if cfg.scheduler == "none":
        return None
    raise DcnasError(f"unknown scheduler {cfg.scheduler!r}")


def _save_checkpoint(path: Path, model, optimizer, scheduler, epoch: int,
                     cfg: TrainConfig, history: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({
        "version": CHECKPOINT_VERSION,
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict(),
        "scheduler_state": scheduler.state_dict() if scheduler else None,
        "epoch": epoch,
        "config": cfg.to_dict(),
        "history": history,
    }, path)


def load_checkpoint(path, model=None):
    ckpt = torch.load(path, map_location="cpu", weights_only=False)
    if ckpt.get("version") != CHECKPOINT_VERSION:
        raise DcnasError(f"unsupported checkpoint version {ckpt.get('version')}")
    if model is not None:
        model.load_state_dict(ckpt["model_state"])
    return ckpt


def train(model, dataset, cfg: TrainConfig, resume_from=None,
          val_data=None) -> TrainResult:
    """Train ``model`` on the controlled dataset or an image folder.

    Controlled (``SynthDataset``) runs validate on the dataset's own val
    split.  Image-folder runs validate on ``val_data`` when given (the usual
    train/val directory pair), otherwise on a fixed-seed pass over the
    training stream.  Label smoothing applies in the ``nas-derived`` regime
    only.  Returns the final checkpoint path and the per-epoch loss history;
    a non-finite loss aborts with the last checkpoint kept on disk.
    """
    loss_name = _resolve_loss(model, cfg)
    _check_compat(model, loss_name)
    is_folder = isinstance(dataset, ImageFolderData)
    smoothing = cfg.label_smoothing if cfg.regime == "nas-derived" else 0.0
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    last_path = out / "last.pt"

    optimizer = _make_optimizer(model, cfg)
    scheduler = _make_scheduler(optimizer, cfg)
    history = []
    start_epoch = 0
    if resume_from is not None:
        ckpt = load_checkpoint(resume_from, model)
        optimizer.load_state_dict(ckpt["optimizer_state"])
        if scheduler and ckpt["scheduler_state"] is not None:
            scheduler.load_state_dict(ckpt["scheduler_state"])
        history = list(ckpt["history"])
        start_epoch = ckpt["epoch"]

    def train_stream(epoch):
        if is_folder:
            return _folder_batches(dataset, cfg, epoch)
        return _epoch_batches(dataset, "train", cfg, epoch, shuffle=True)

    def val_stream():
        if is_folder:
            return _folder_batches(val_data if val_data is not None else dataset,
                                   cfg, 0)
        return _epoch_batches(dataset, "val", cfg, 0, shuffle=False)

    model.train()
    for epoch in range(start_epoch, cfg.epochs):
        train_losses = []
        for noisy, clean, boxes, labels in train_stream(epoch):
            loss = _batch_loss(model, loss_name, noisy, clean, boxes, labels,
                               smoothing)
            if not torch.isfinite(loss):
                _save_checkpoint(last_path, model, optimizer, scheduler, epoch,
                                 cfg, history)
                raise TrainingDiverged(
                    f"non-finite training loss at epoch {epoch}", str(last_path))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            train_losses.append(float(loss.detach()))

        model.eval()
        val_losses = []
        with torch.no_grad():
            for noisy, clean, boxes, labels in val_stream():
                val_losses.append(float(_batch_loss(
                    model, loss_name, noisy, clean, boxes, labels, smoothing)))
        model.train()

        val_loss = float(np.mean(val_losses)) if val_losses else math.nan
        lr_now = optimizer.param_groups[0]["lr"]
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(train_losses)) if train_losses else math.nan,
            "val_loss": val_loss,
            "lr": lr_now,
        })
        if scheduler is not None:
            if cfg.scheduler == "plateau":
                scheduler.step(val_loss)
            else:
                scheduler.step()
        if cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            _save_checkpoint(out / f"epoch{epoch + 1:04d}.pt", model, optimizer,
                             scheduler, epoch + 1, cfg, history)

    _save_checkpoint(last_path, model, optimizer, scheduler, cfg.epochs, cfg,
                     history)
    (out / "history.jsonl").write_text(
        "".join(json.dumps(h) + "\n" for h in history))
    model.eval()
    return TrainResult(checkpoint_path=str(last_path), history=history)
