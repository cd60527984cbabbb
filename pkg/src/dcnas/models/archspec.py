"""Serialized architecture description: the output of search, input of builders.

An ArchSpec names a macro preset, one candidate index per searchable layer,
the search-space id those indices refer to, the latency target it was
searched for, and provenance (seed, epochs, content hash).  Serialization is
versioned JSON and round-trips losslessly.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ArchSpecError
from .macro import MacroConfig, get_macro

ARCHSPEC_VERSION = 1


@dataclass
class ArchSpec:
    macro: str
    choices: tuple
    search_space_id: str
    target_latency_ms: float | None = None
    provenance: dict = field(default_factory=dict)
    version: int = ARCHSPEC_VERSION

    def __post_init__(self):
        self.choices = tuple(int(c) for c in self.choices)

    def validate(self, space=None, macro: MacroConfig | None = None) -> None:
        """Check choice count against the macro and indices against the space."""
        macro = macro if macro is not None else get_macro(self.macro)
        expected = macro.num_searchable()
        if len(self.choices) != expected:
            raise ArchSpecError(
                f"spec has {len(self.choices)} choices but macro {macro.name!r} "
                f"has {expected} searchable layers"
            )
        if space is not None:
            if space.id != self.search_space_id:
                raise ArchSpecError(
                    f"spec was searched in {self.search_space_id!r}, got space {space.id!r}"
                )
            n = len(space.candidates)
            bad = [c for c in self.choices if not 0 <= c < n]
            if bad:
                raise ArchSpecError(f"choice indices {bad} out of range for {n} candidates")

    def _canonical(self) -> dict:
        return {
            "version": self.version,
            "macro": self.macro,
            "choices": list(self.choices),
            "search_space_id": self.search_space_id,
            "target_latency_ms": self.target_latency_ms,
        }

    def content_hash(self) -> str:
        blob = json.dumps(self._canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_dict(self) -> dict:
        d = self._canonical()
        d["provenance"] = dict(self.provenance)
        d["provenance"].setdefault("content_hash", self.content_hash())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        if d.get("version") != ARCHSPEC_VERSION:
            raise ArchSpecError(f"unsupported ArchSpec version {d.get('version')}")
        return cls(
            macro=d["macro"],
            choices=tuple(d["choices"]),
            search_space_id=d["search_space_id"],
            target_latency_ms=d.get("target_latency_ms"),
            provenance=dict(d.get("provenance", {})),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "ArchSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def random_archspec(macro, space, rng: np.random.Generator,
                    target_latency_ms: float | None = None) -> ArchSpec:
    """Uniform random choices; handy for shape checks and toy baselines."""
    macro = get_macro(macro)
    n = macro.num_searchable()
    choices = tuple(int(rng.integers(len(space.candidates))) for _ in range(n))
    return ArchSpec(
        macro=macro.name, choices=choices, search_space_id=space.id,
        target_latency_ms=target_latency_ms,
        provenance={"source": "random"},
    )
