"""Wall-clock latency measurement under a fixed protocol.

Protocol: untimed warm-up passes, then timed passes at a fixed batch size on
one device, reporting the mean per-pass milliseconds.  Measurements take a
process-wide lock so two benchmarks never share the device.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, asdict

import torch

from ..errors import DeviceError

_DEVICE_LOCK = threading.Lock()


@dataclass(frozen=True)
class LatencyProtocol:
    batch_size: int = 32
    warmup_iters: int = 100
    timed_iters: int = 1000
    device: str = "cpu"
    input_shape: tuple = (1, 64, 64)  # (C, H, W)

    def __post_init__(self):
        if self.warmup_iters < 0:
            raise ValueError("warmup_iters must be >= 0")
        if self.timed_iters < 1:
            raise ValueError("timed_iters must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LatencyProtocol":
        return cls(
            batch_size=d["batch_size"], warmup_iters=d["warmup_iters"],
            timed_iters=d["timed_iters"], device=d["device"],
            input_shape=tuple(d["input_shape"]),
        )


@dataclass(frozen=True)
class LatencyMeasurement:
    milliseconds: float
    std_ms: float
    protocol: LatencyProtocol


def _sync(device: torch.device):
    if device.type == "cuda":
        torch.cuda.synchronize(device)


def measure_latency(model: torch.nn.Module, protocol: LatencyProtocol,
                    forward_args: tuple = ()) -> LatencyMeasurement:
    """Mean per-pass wall time in ms for ``model`` under ``protocol``."""
    device = torch.device(protocol.device)
    if device.type == "cuda" and not torch.cuda.is_available():
        raise DeviceError(f"device {protocol.device!r} unavailable")
    shape = (protocol.batch_size,) + protocol.input_shape
    with _DEVICE_LOCK:
        was_training = model.training
        model.eval()
        try:
            model.to(device)
            x = torch.zeros(shape, device=device)
            with torch.no_grad():
                for _ in range(protocol.warmup_iters):
                    model(x, *forward_args)
                samples = []
                for _ in range(protocol.timed_iters):
                    _sync(device)
                    t0 = time.perf_counter()
                    model(x, *forward_args)
                    _sync(device)
                    samples.append((time.perf_counter() - t0) * 1000.0)
        except torch.cuda.OutOfMemoryError as exc:
            raise DeviceError(f"out of memory at input shape {shape}") from exc
        except RuntimeError as exc:
            if "out of memory" in str(exc).lower():
                raise DeviceError(f"out of memory at input shape {shape}") from exc
            raise
        finally:
            model.train(was_training)
    mean = sum(samples) / len(samples)
    var = sum((s - mean) ** 2 for s in samples) / len(samples)
    return LatencyMeasurement(milliseconds=mean, std_ms=var**0.5, protocol=protocol)
