"""Toolkit for building, profiling, and searching joint image-denoising +
classification networks under a target latency."""

from . import data, losses, metrics, models, profiler, search, training
from .config import json_schema, validate_config
from .errors import (
    ArchSpecError,
    CheckFailure,
    ConfigError,
    DataError,
    DcnasError,
    DeviceError,
    FlopsError,
    LutError,
    PlacementError,
    ReportError,
    SearchDivergence,
    TrainingDiverged,
)
from .presets import PRESETS, run_preset
from .zoo import resolve_model

__version__ = "0.1.0"

__all__ = [
    "data", "losses", "metrics", "models", "profiler", "search", "training",
    "json_schema", "validate_config",
    "ArchSpecError", "CheckFailure", "ConfigError", "DataError", "DcnasError",
    "DeviceError", "FlopsError", "LutError", "PlacementError", "ReportError",
    "SearchDivergence", "TrainingDiverged",
    "PRESETS", "run_preset", "resolve_model",
    "__version__",
]
