"""Per-operator latency lookup tables and the differentiable latency estimate.

The table holds one measurement per (searchable layer position, candidate),
taken in isolation at that layer's channels / resolution / stride.  Stem,
fixed blocks, and the head are measured once and folded into a fixed
overhead.  The estimated network latency is the overhead plus the
weight-weighted sum of entries, which is exact for one-hot weights.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..errors import LutError
from ..models.blocks import MBConv
from ..models.macro import MacroConfig, get_macro
from .latency import LatencyProtocol, measure_latency

LUT_VERSION = 1


@dataclass
class LatencyTable:
    protocol: LatencyProtocol
    device_id: str
    candidates: tuple                    # candidate names, in search-space order
    entries: dict = field(default_factory=dict)   # (position, name) -> ms
    fixed_overhead_ms: float = 0.0
    created_at: str = ""
    version: int = LUT_VERSION

    def positions(self) -> tuple:
        return tuple(sorted({pos for pos, _ in self.entries}))

    def lookup(self, position: int, candidate: str) -> float:
        try:
            return self.entries[(position, candidate)]
        except KeyError:
            raise LutError(
                f"no latency entry for layer {position}, candidate {candidate!r}"
            ) from None

    def validate(self) -> None:
        if not self.entries:
            raise LutError("latency table is empty")
        for pos in self.positions():
            for name in self.candidates:
                ms = self.lookup(pos, name)
                if not ms > 0:
                    raise LutError(f"non-positive latency for layer {pos}, {name!r}")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "device_id": self.device_id,
            "created_at": self.created_at,
            "protocol": self.protocol.to_dict(),
            "candidates": list(self.candidates),
            "fixed_overhead_ms": self.fixed_overhead_ms,
            "entries": {f"{pos}|{name}": ms for (pos, name), ms in self.entries.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatencyTable":
        if d.get("version") != LUT_VERSION:
            raise LutError(f"unsupported latency table version {d.get('version')}")
        entries = {}
        for key, ms in d["entries"].items():
            pos, name = key.split("|", 1)
            entries[(int(pos), name)] = float(ms)
        return cls(
            protocol=LatencyProtocol.from_dict(d["protocol"]),
            device_id=d["device_id"],
            candidates=tuple(d["candidates"]),
            entries=entries,
            fixed_overhead_ms=float(d.get("fixed_overhead_ms", 0.0)),
            created_at=d.get("created_at", ""),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "LatencyTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _layer_protocol(protocol: LatencyProtocol, in_ch: int, scale: int) -> LatencyProtocol:
    _, h, w = protocol.input_shape
    return LatencyProtocol(
        batch_size=protocol.batch_size, warmup_iters=protocol.warmup_iters,
        timed_iters=protocol.timed_iters, device=protocol.device,
        input_shape=(in_ch, max(1, h // scale), max(1, w // scale)),
    )


def build_latency_lut(space, macro, protocol: LatencyProtocol,
                      measure_overhead: bool = True,
                      num_classes: int = 100) -> LatencyTable:
    """Measure every (searchable layer, candidate) pair in isolation."""
    from ..search.space import get_search_space

    space = get_search_space(space)
    macro = get_macro(macro)
    table = LatencyTable(
        protocol=protocol,
        device_id=protocol.device,
        candidates=space.candidate_names(),
        created_at=time.strftime("%Y-%m-%dT%H:%M:%S"),
    )
    for geom in macro.searchable_layers():
        layer_proto = _layer_protocol(protocol, geom.in_ch, geom.scale)
        for cfg in space.candidates:
            block = MBConv(geom.in_ch, geom.out_ch, cfg, stride=geom.stride)
            ms = measure_latency(block, layer_proto).milliseconds
            table.entries[(geom.position, cfg.name)] = ms
    if measure_overhead:
        table.fixed_overhead_ms = _measure_overhead(macro, protocol, num_classes)
    table.validate()
    return table


def _measure_overhead(macro: MacroConfig, protocol: LatencyProtocol,
                      num_classes: int) -> float:
    """Stem + fixed blocks + classifier head, each measured in isolation."""
    from ..models.nas_models import FIXED_BLOCK, _stem

    total = measure_latency(
        _stem(macro), _layer_protocol(protocol, macro.in_ch, 1)
    ).milliseconds

    in_ch = macro.stem_channels
    scale = macro.stem_stride
    for stage in macro.stages:
        for b_idx in range(stage.blocks):
            stride = stage.stride if b_idx == 0 else 1
            if not stage.searchable:
                block = MBConv(in_ch, stage.channels, FIXED_BLOCK, stride=stride)
                total += measure_latency(
                    block, _layer_protocol(protocol, in_ch, scale)
                ).milliseconds
            scale *= stride
            in_ch = stage.channels

    head = torch.nn.Sequential(
        torch.nn.Conv2d(in_ch, macro.head_channels, 1, bias=False),
        torch.nn.BatchNorm2d(macro.head_channels),
        torch.nn.ReLU(inplace=True),
        torch.nn.AdaptiveAvgPool2d(1),
        torch.nn.Flatten(1),
        torch.nn.Linear(macro.head_channels, num_classes),
    )
    total += measure_latency(head, _layer_protocol(protocol, in_ch, scale)).milliseconds
    return total


def estimate_latency(arch_weights, lut: LatencyTable,
                     fixed_overhead_ms: float | None = None):
    """Expected latency under per-layer candidate weights.

    ``arch_weights`` is one weight vector per searchable layer, ordered like
    the table's candidate list.  Torch tensors keep their autograd graph;
    plain sequences yield a float.  One-hot weights give the exact sum of
    the selected entries plus the overhead.
    """
    overhead = lut.fixed_overhead_ms if fixed_overhead_ms is None else fixed_overhead_ms
    is_torch = any(isinstance(w, torch.Tensor) for w in arch_weights)
    total = torch.zeros(()) if is_torch else 0.0
    for pos, weights in enumerate(arch_weights):
        row = [lut.lookup(pos, name) for name in lut.candidates]
        if isinstance(weights, torch.Tensor):
            if len(weights) != len(row):
                raise LutError(
                    f"layer {pos}: {len(weights)} weights vs {len(row)} candidates"
                )
            total = total + (weights * torch.tensor(row, dtype=weights.dtype)).sum()
        else:
            weights = list(weights)
            if len(weights) != len(row):
                raise LutError(
                    f"layer {pos}: {len(weights)} weights vs {len(row)} candidates"
                )
            total = total + sum(w * ms for w, ms in zip(weights, row))
    return total + overhead


def composition_diagnostic(model, lut: LatencyTable, spec,
                           protocol: LatencyProtocol) -> dict:
    """Whole-model measurement vs. table-sum estimate (diagnostic only)."""
    onehot = []
    for choice in spec.choices:
        row = [0.0] * len(lut.candidates)
        row[choice] = 1.0
        onehot.append(row)
    estimated = float(estimate_latency(onehot, lut))
    measured = measure_latency(model, protocol).milliseconds
    return {
        "estimated_ms": estimated,
        "measured_ms": measured,
        "relative_error": (estimated - measured) / measured if measured else float("nan"),
    }
