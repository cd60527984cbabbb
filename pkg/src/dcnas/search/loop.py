"""Bilevel search loop with a latency-targeted objective.

Alternates per epoch: operator/network weights update on the training share
of the data with the task loss; selection logits update on the held-out
share with the task loss plus ``latency_weight * |estimate / target - 1|``.
The temperature anneals linearly, and the first ``warmup_frac`` of epochs
freezes the logits so candidate weights can settle.

The trace carries one record per epoch plus the initial state (``epoch`` 0),
so a search of E epochs yields E + 1 records.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import torch

from ..data.synth import SynthDataset, add_gaussian_noise, extract_digits
from ..errors import ArchSpecError, SearchDivergence
from ..losses import ce_label_smoothing
from ..models.archspec import ArchSpec
from ..models.macro import get_macro
from ..profiler.lut import LatencyTable, estimate_latency
from .space import get_search_space
from .supernet import Supernet, SupernetState, init_supernet


@dataclass
class SearchConfig:
    search_space: str = "size-4"
    macro: str = "tiny3"
    target_latency_ms: float = 1.0
    latency_weight: float = 0.1
    epochs: int = 90
    batch_size: int = 64
    weight_lr: float = 2e-2
    weight_momentum: float = 0.9
    weight_decay: float = 1e-4
    alpha_lr: float = 3e-4
    tau_start: float = 5.0
    tau_end: float = 0.2
    warmup_frac: float = 0.1
    split_ratio: float = 0.8
    task_loss: str = "ce"          # classification-driven search
    label_smoothing: float = 0.1
    noise_policy: str = "clean"    # "clean" | "noisy"
    hard: bool = True
    num_classes: int = 10
    seed: int = 0

    def __post_init__(self):
        problems = []
        if self.target_latency_ms <= 0:
            problems.append("target_latency_ms must be > 0")
        if self.latency_weight < 0:
            problems.append("latency_weight must be >= 0")
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if not 0 < self.split_ratio < 1:
            problems.append("split_ratio must be in (0, 1)")
        if self.tau_start <= 0 or self.tau_end <= 0:
            problems.append("temperatures must be positive")
        if self.noise_policy not in ("clean", "noisy"):
            problems.append(f"unknown noise_policy {self.noise_policy!r}")
        if problems:
            raise ArchSpecError("; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SearchData:
    """Classification data for the search loop: clean inputs plus labels."""

    inputs: np.ndarray   # (N, C, H, W) float32 in [0, 1]
    labels: np.ndarray   # (N,) int64

    def __post_init__(self):
        if len(self.inputs) != len(self.labels):
            raise ArchSpecError("inputs and labels differ in length")


def search_data_from_synth(dataset: SynthDataset, split: str = "train",
                           limit: int | None = None) -> SearchData:
    """Digit crops of the controlled dataset as single-label search data."""
    n = dataset.size(split) if limit is None else min(limit, dataset.size(split))
    crops, labels = [], []
    for i in range(n):
        sample = dataset.sample(split, i)
        c, l = extract_digits(sample, sample.canvas)
        crops.append(c)
        labels.append(l)
    inputs = np.concatenate(crops)[:, None]  # (2n, 1, 28, 28)
    return SearchData(inputs=inputs.astype(np.float32),
                      labels=np.concatenate(labels))


def search_loss(task_loss, arch_weights, lut: LatencyTable, cfg: SearchConfig):
    """Task loss plus the two-sided relative latency penalty."""
    est = estimate_latency(arch_weights, lut)
    ratio = est / cfg.target_latency_ms
    penalty = cfg.latency_weight * torch.abs(torch.as_tensor(ratio) - 1.0)
    return task_loss + penalty


def alpha_entropy(state: SupernetState) -> np.ndarray:
    """Shannon entropy (nats) of softmax(alpha) per searchable layer."""
    out = []
    for a in state.alphas:
        a = np.asarray(a, dtype=np.float64)
        p = np.exp(a - a.max())
        p /= p.sum()
        out.append(float(-(p * np.log(np.clip(p, 1e-300, None))).sum()))
    return np.asarray(out)


def derive_architecture(state: SupernetState, macro, cfg: SearchConfig) -> ArchSpec:
    """Discretize: per layer argmax of alpha, ties to the lowest index."""
    macro = get_macro(macro)
    choices = tuple(int(np.argmax(a)) for a in state.alphas)
    spec = ArchSpec(
        macro=macro.name,
        choices=choices,
        search_space_id=cfg.search_space,
        target_latency_ms=cfg.target_latency_ms,
        provenance={
            "seed": cfg.seed,
            "epochs": state.epoch,
            "tau_final": state.tau,
        },
    )
    spec.provenance["content_hash"] = spec.content_hash()
    return spec


def _snapshot(net: Supernet, lut: LatencyTable, epoch: int, tau: float,
              train_loss, val_task, val_search) -> dict:
    state = SupernetState(
        alphas=[b.alpha.detach().numpy().astype(np.float64).copy()
                for b in net.mixed_layers],
        tau=tau, epoch=epoch,
    )
    soft = [torch.softmax(torch.as_tensor(a), dim=-1).tolist() for a in state.alphas]
    return {
        "epoch": epoch,
        "tau": tau,
        "alpha": [a.tolist() for a in state.alphas],
        "entropy": alpha_entropy(state).tolist(),
        "est_latency_ms": float(estimate_latency(soft, lut)),
        "train_loss": train_loss,
        "val_task_loss": val_task,
        "val_search_loss": val_search,
    }


def _task_loss_fn(cfg: SearchConfig, logits, labels):
    if cfg.task_loss == "ce":
        return ce_label_smoothing(logits, labels, cfg.label_smoothing)
    raise ArchSpecError(
        f"task loss {cfg.task_loss!r} is not available for classification search"
    )


def _check_lut(lut: LatencyTable, macro, space) -> None:
    n = get_macro(macro).num_searchable()
    for pos in range(n):
        for name in get_search_space(space).candidate_names():
            lut.lookup(pos, name)


def run_search(data: SearchData, cfg: SearchConfig, lut: LatencyTable):
    """Run the full bilevel loop; returns (trace, derived ArchSpec).

    Deterministic given ``cfg.seed``: parameter init, Gumbel draws, batch
    order, and noise draws all derive from it.
    """
    space = get_search_space(cfg.search_space)
    macro = get_macro(cfg.macro)
    _check_lut(lut, macro, space)

    net, _ = init_supernet(space, macro, cfg.seed, num_classes=cfg.num_classes)
    w_opt = torch.optim.SGD(net.weight_parameters(), lr=cfg.weight_lr,
                            momentum=cfg.weight_momentum,
                            weight_decay=cfg.weight_decay)
    a_opt = torch.optim.Adam(net.alpha_parameters(), lr=cfg.alpha_lr)

    n = len(data.inputs)
    n_w = max(1, int(round(cfg.split_ratio * n)))
    if n_w >= n:
        n_w = n - 1
    order_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x5EA2C4)))
    noise_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x4015E)))

    taus = np.linspace(cfg.tau_start, cfg.tau_end, cfg.epochs) if cfg.epochs > 1 \
        else np.array([cfg.tau_start])
    warmup_epochs = int(cfg.warmup_frac * cfg.epochs)

    trace = [_snapshot(net, lut, 0, float(taus[0]), None, None, None)]
    trace[0]["search_config"] = cfg.to_dict()

    def batches(indices):
        shuffled = order_rng.permutation(indices)
        for start in range(0, len(shuffled), cfg.batch_size):
            yield shuffled[start : start + cfg.batch_size]

    def make_batch(idx):
        x = data.inputs[idx]
        if cfg.noise_policy == "noisy":
            sigma = float(noise_rng.uniform(0.0, 1.0))
            x = add_gaussian_noise(x, sigma, noise_rng)
        return torch.from_numpy(np.ascontiguousarray(x)), torch.from_numpy(data.labels[idx])

    for epoch in range(cfg.epochs):
        tau = float(taus[epoch])
        net.tau = tau
        train_losses = []
        for idx in batches(np.arange(n_w)):
            x, y = make_batch(idx)
            logits = net(x, tau=tau, hard=cfg.hard)
            loss = _task_loss_fn(cfg, logits, y)
            if not torch.isfinite(loss):
                raise SearchDivergence(f"non-finite task loss at epoch {epoch}", trace)
            w_opt.zero_grad()
            loss.backward()
            w_opt.step()
            train_losses.append(float(loss.detach()))
        val_task, val_search = [], []
        if epoch >= warmup_epochs:
            for idx in batches(np.arange(n_w, n)):
                x, y = make_batch(idx)
                logits = net(x, tau=tau, hard=cfg.hard)
                task = _task_loss_fn(cfg, logits, y)
                total = search_loss(task, net.last_arch_weights, lut, cfg)
                if not torch.isfinite(total):
                    raise SearchDivergence(f"non-finite search loss at epoch {epoch}", trace)
                a_opt.zero_grad()
                total.backward()
                a_opt.step()
                val_task.append(float(task.detach()))
                val_search.append(float(total.detach()))
        net.epoch = epoch + 1
        trace.append(_snapshot(
            net, lut, epoch + 1, tau,
            float(np.mean(train_losses)) if train_losses else None,
            float(np.mean(val_task)) if val_task else None,
            float(np.mean(val_search)) if val_search else None,
        ))

    net.tau = float(taus[-1])
    spec = derive_architecture(net.state(), macro, cfg)
    return trace, spec
