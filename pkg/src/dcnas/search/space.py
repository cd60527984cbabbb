"""Candidate-operator search spaces.

Three presets over inverted-residual configurations: ``size-4`` (no SE),
``size-6`` (adds the two small k3 SE variants), ``size-8`` (all kernel /
expansion / SE combinations).
"""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import ArchSpecError
from ..models.blocks import MBConvConfig


@dataclass(frozen=True)
class SearchSpace:
    id: str
    candidates: tuple  # ordered MBConvConfig

    def __post_init__(self):
        if not self.candidates:
            raise ArchSpecError("search space must contain at least one candidate")

    def __len__(self):
        return len(self.candidates)

    def candidate_names(self) -> tuple:
        return tuple(c.name for c in self.candidates)

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.candidates):
            if c.name == name:
                return i
        raise ArchSpecError(f"candidate {name!r} not in space {self.id!r}")


_BASE = (
    MBConvConfig(kernel=3, expansion=3.0),
    MBConvConfig(kernel=3, expansion=6.0),
    MBConvConfig(kernel=5, expansion=3.0),
    MBConvConfig(kernel=5, expansion=6.0),
)
_SE_SMALL = (
    MBConvConfig(kernel=3, expansion=3.0, se=True),
    MBConvConfig(kernel=3, expansion=6.0, se=True),
)
_SE_LARGE = (
    MBConvConfig(kernel=5, expansion=3.0, se=True),
    MBConvConfig(kernel=5, expansion=6.0, se=True),
)

SEARCH_SPACES = {
    "size-4": SearchSpace(id="size-4", candidates=_BASE),
    "size-6": SearchSpace(id="size-6", candidates=_BASE + _SE_SMALL),
    "size-8": SearchSpace(id="size-8", candidates=_BASE + _SE_SMALL + _SE_LARGE),
}


def get_search_space(name_or_space) -> SearchSpace:
    if isinstance(name_or_space, SearchSpace):
        return name_or_space
    if name_or_space in SEARCH_SPACES:
        return SEARCH_SPACES[name_or_space]
    raise ArchSpecError(
        f"unknown search space {name_or_space!r}; use one of {sorted(SEARCH_SPACES)}"
    )
