"""Over-parameterized search network with per-layer operator mixing.

Every searchable layer instantiates all candidates with independent
parameters; there is no per-stage depth gate, so every block runs on every
forward pass.  Operator selection is relaxed with Gumbel-softmax weights over
the per-layer logits ``alpha``; hard (straight-through) sampling keeps the
forward value one-hot while gradients flow through the soft weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..errors import ArchSpecError
from ..models.blocks import MBConv
from ..models.macro import MacroConfig, get_macro
from ..models.nas_models import FIXED_BLOCK, _stem
from .space import get_search_space

_GUMBEL_TINY = 1e-20


def gumbel_weights(alpha: torch.Tensor, tau: float, rng: torch.Generator,
                   hard: bool = True) -> torch.Tensor:
    """Simplex weights ``softmax((alpha + G) / tau)`` with standard Gumbel G.

    With ``hard=True`` the returned value is exactly one-hot at the argmax of
    the soft weights, with the soft weights on the gradient path.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    alpha = torch.as_tensor(alpha, dtype=torch.float32) if not isinstance(alpha, torch.Tensor) else alpha
    u = torch.rand(alpha.shape, generator=rng).clamp_min(_GUMBEL_TINY)
    g = -torch.log(-torch.log(u))
    w = torch.softmax((alpha + g) / tau, dim=-1)
    if hard:
        idx = int(np.argmax(w.detach().numpy()))
        onehot = torch.zeros_like(w)
        onehot[idx] = 1.0
        # (w - w.detach()) is exactly zero in value, so the forward result is
        # exactly one-hot while gradients still flow through the soft weights
        return onehot + (w - w.detach())
    return w


@dataclass
class SupernetState:
    """Snapshot of the search state: per-layer alphas, temperature, epoch."""

    alphas: list            # list of float np arrays, one per searchable layer
    tau: float
    epoch: int
    rng_state: object = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ArchSpecError(f"temperature must be positive, got {self.tau}")
        for i, a in enumerate(self.alphas):
            if not np.all(np.isfinite(a)):
                raise ArchSpecError(f"alpha vector {i} contains non-finite values")


class MixedLayer(nn.Module):
    """All candidate operators of one layer plus its selection logits."""

    def __init__(self, candidates):
        super().__init__()
        self.candidates = nn.ModuleList(candidates)
        self.alpha = nn.Parameter(torch.zeros(len(candidates)))

    def forward(self, x, tau: float, rng: torch.Generator, hard: bool):
        weights = gumbel_weights(self.alpha, tau, rng, hard=hard)
        out = None
        for w, block in zip(weights, self.candidates):
            term = w * block(x)
            out = term if out is None else out + term
        return out, weights


class Supernet(nn.Module):
    """Stem + mixed/fixed blocks + classifier head over a macro skeleton."""

    def __init__(self, space, macro: MacroConfig, num_classes: int = 10):
        super().__init__()
        self.space = space
        self.macro = macro
        self.stem = _stem(macro)
        searchable = {(g.stage, g.block): g for g in macro.searchable_layers()}
        blocks = []
        in_ch = macro.stem_channels
        for s_idx, stage in enumerate(macro.stages):
            for b_idx in range(stage.blocks):
                stride = stage.stride if b_idx == 0 else 1
                if (s_idx, b_idx) in searchable:
                    cands = [MBConv(in_ch, stage.channels, cfg, stride=stride)
                             for cfg in space.candidates]
                    blocks.append(MixedLayer(cands))
                else:
                    blocks.append(MBConv(in_ch, stage.channels, FIXED_BLOCK, stride=stride))
                in_ch = stage.channels
        self.blocks = nn.ModuleList(blocks)
        self.head = nn.Sequential(
            nn.Conv2d(in_ch, macro.head_channels, 1, bias=False),
            nn.BatchNorm2d(macro.head_channels),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(1),
            nn.Linear(macro.head_channels, num_classes),
        )
        self.gumbel_rng = torch.Generator()
        self.epoch = 0
        self.tau = 1.0
        self.last_arch_weights = []

    @property
    def mixed_layers(self):
        return [b for b in self.blocks if isinstance(b, MixedLayer)]

    def num_candidate_instances(self) -> int:
        return sum(len(b.candidates) for b in self.mixed_layers)

    def alpha_parameters(self):
        return [b.alpha for b in self.mixed_layers]

    def weight_parameters(self):
        alpha_ids = {id(a) for a in self.alpha_parameters()}
        return [p for p in self.parameters() if id(p) not in alpha_ids]

    def forward(self, x, tau: float | None = None, hard: bool = True):
        tau = self.tau if tau is None else tau
        out = self.stem(x)
        weights = []
        for block in self.blocks:
            if isinstance(block, MixedLayer):
                out, w = block(out, tau, self.gumbel_rng, hard)
                weights.append(w)
            else:
                out = block(out)
        self.last_arch_weights = weights
        return self.head(out)

    def state(self) -> SupernetState:
        return SupernetState(
            alphas=[b.alpha.detach().numpy().astype(np.float64).copy()
                    for b in self.mixed_layers],
            tau=self.tau,
            epoch=self.epoch,
            rng_state=self.gumbel_rng.get_state(),
        )


def init_supernet(search_space, macro, seed: int, num_classes: int = 10):
    """Build a supernet with seeded parameter init and zeroed alphas."""
    space = get_search_space(search_space)
    macro = get_macro(macro)
    torch.manual_seed(seed)
    net = Supernet(space, macro, num_classes=num_classes)
    net.gumbel_rng.manual_seed(seed + 1)
    return net, net.state()
