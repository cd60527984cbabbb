"""Structured experiment configuration: YAML in, normalized dict out.

Every tunable the toolkit uses appears here with its default, so a normalized
config is a complete record of a run.  Unknown keys are rejected and every
violation is reported with its dotted path.  ``json_schema()`` returns the
equivalent JSON-schema document (shipped as ``docs/config-schema.json``).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .data.synth import GRID_SIGMAS
from .errors import ConfigError


@dataclass(frozen=True)
class Option:
    default: object
    kind: str                  # int | float | str | bool | list[float] | opt[int]
    doc: str = ""
    choices: tuple | None = None
    minimum: float | None = None
    maximum: float | None = None
    exclusive_min: bool = False
    exclusive_max: bool = False


SCHEMA = {
    "run_root": Option("runs", "str", "directory for run outputs"),
    "device": Option("cpu", "str", "torch device for training and latency"),
    "seed": Option(0, "int", "global seed", minimum=0),
    "dataset": {
        "count": Option(30000, "int", "number of composed samples", minimum=1),
        "canvas_size": Option(64, "int", "square canvas edge in pixels", minimum=28),
        "corpus": Option("glyph", "str", "digit corpus id: glyph | glyph:<n> | mnist:<dir>"),
        "out_dir": Option("data/synth", "str", "where the built dataset lives"),
        "seed": Option(0, "int", "dataset composition seed", minimum=0),
    },
    "noise": {
        "mode": Option("grid", "str", "grid | uniform", choices=("grid", "uniform")),
        "levels": Option(list(GRID_SIGMAS), "list[float]", "grid sigma levels"),
        "range": Option([0.0, 1.0], "list[float]", "uniform sigma range [lo, hi]"),
    },
    "train": {
        "regime": Option("controlled", "str", "training regime",
                         choices=("controlled", "nas-derived")),
        "optimizer": Option("adam", "str", choices=("adam", "sgd")),
        "lr": Option(1e-3, "float", "learning rate", minimum=0, exclusive_min=True),
        "momentum": Option(0.9, "float", minimum=0, maximum=1),
        "weight_decay": Option(0.0, "float", minimum=0),
        "scheduler": Option("plateau", "str", choices=("plateau", "cosine", "none")),
        "plateau_factor": Option(0.5, "float", minimum=0, maximum=1, exclusive_min=True),
        "plateau_patience": Option(5, "int", minimum=0),
        "min_lr": Option(1e-6, "float", minimum=0),
        "epochs": Option(100, "int", minimum=1),
        "batch_size": Option(128, "int", minimum=1),
        "loss": Option("auto", "str",
                       choices=("auto", "charbonnier", "ce", "dcnet", "den", "both")),
        "label_smoothing": Option(0.1, "float", minimum=0, maximum=1, exclusive_max=True),
        "checkpoint_every": Option(0, "int", minimum=0),
        "max_samples": Option(None, "opt[int]", "subset cap for smoke runs", minimum=1),
        "seed": Option(0, "int", minimum=0),
    },
    "search": {
        "space": Option("size-4", "str", choices=("size-4", "size-6", "size-8")),
        "macro": Option("tiny3", "str", "macro preset name"),
        "target_latency_ms": Option(1.0, "float", minimum=0, exclusive_min=True),
        "latency_weight": Option(0.1, "float", minimum=0),
        "epochs": Option(90, "int", minimum=1),
        "batch_size": Option(64, "int", minimum=1),
        "weight_lr": Option(2e-2, "float", minimum=0, exclusive_min=True),
        "weight_momentum": Option(0.9, "float", minimum=0, maximum=1),
        "weight_decay": Option(1e-4, "float", minimum=0),
        "alpha_lr": Option(3e-4, "float", minimum=0, exclusive_min=True),
        "tau_start": Option(5.0, "float", minimum=0, exclusive_min=True),
        "tau_end": Option(0.2, "float", minimum=0, exclusive_min=True),
        "warmup_frac": Option(0.1, "float", minimum=0, maximum=1, exclusive_max=True),
        "split_ratio": Option(0.8, "float", minimum=0, maximum=1,
                              exclusive_min=True, exclusive_max=True),
        "task_loss": Option("ce", "str", choices=("ce",)),
        "noise_policy": Option("clean", "str", choices=("clean", "noisy")),
        "hard": Option(True, "bool", "straight-through one-hot sampling"),
        "num_classes": Option(10, "int", minimum=2),
        "label_smoothing": Option(0.1, "float", minimum=0, maximum=1, exclusive_max=True),
        "seed": Option(0, "int", minimum=0),
    },
    "latency": {
        "batch_size": Option(32, "int", minimum=1),
        "warmup_iters": Option(100, "int", minimum=0),
        "timed_iters": Option(1000, "int", minimum=1),
    },
    "flops": {
        "macs_to_flops": Option(2, "int", choices=(1, 2)),
    },
    "eval": {
        "batch_size": Option(64, "int", minimum=1),
        "seed": Option(0, "int", minimum=0),
        "max_samples": Option(None, "opt[int]", minimum=1),
    },
}


def _check_scalar(path: str, value, opt: Option, problems: list):
    kind = opt.kind
    if kind.startswith("opt["):
        if value is None:
            return None
        kind = kind[4:-1]
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{path}: expected int, got {value!r}")
            return value
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{path}: expected number, got {value!r}")
            return value
        value = float(value)
    elif kind == "str":
        if not isinstance(value, str):
            problems.append(f"{path}: expected string, got {value!r}")
            return value
    elif kind == "bool":
        if not isinstance(value, bool):
            problems.append(f"{path}: expected bool, got {value!r}")
            return value
    elif kind == "list[float]":
        if not isinstance(value, (list, tuple)) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            problems.append(f"{path}: expected a list of numbers, got {value!r}")
            return value
        value = [float(v) for v in value]
        if any(v < 0 for v in value):
            problems.append(f"{path}: values must be non-negative")
        return value
    if opt.choices is not None and value not in opt.choices:
        problems.append(f"{path}: {value!r} not in {list(opt.choices)}")
    if opt.minimum is not None and isinstance(value, (int, float)):
        if opt.exclusive_min and not value > opt.minimum:
            problems.append(f"{path}: must be > {opt.minimum}, got {value}")
        elif not opt.exclusive_min and not value >= opt.minimum:
            problems.append(f"{path}: must be >= {opt.minimum}, got {value}")
    if opt.maximum is not None and isinstance(value, (int, float)):
        if opt.exclusive_max and not value < opt.maximum:
            problems.append(f"{path}: must be < {opt.maximum}, got {value}")
        elif not opt.exclusive_max and not value <= opt.maximum:
            problems.append(f"{path}: must be <= {opt.maximum}, got {value}")
    return value


def _normalize(section: dict, schema: dict, prefix: str, problems: list) -> dict:
    out = {}
    for key, value in section.items():
        if key not in schema:
            problems.append(f"{prefix}{key}: unknown key")
    for key, opt in schema.items():
        path = f"{prefix}{key}"
        if isinstance(opt, dict):
            sub = section.get(key, {})
            if not isinstance(sub, dict):
                problems.append(f"{path}: expected a mapping, got {sub!r}")
                sub = {}
            out[key] = _normalize(sub, opt, path + ".", problems)
        else:
            if key in section:
                out[key] = _check_scalar(path, section[key], opt, problems)
            else:
                d = opt.default
                out[key] = list(d) if isinstance(d, (list, tuple)) else d
    return out


def _cross_checks(cfg: dict, problems: list) -> None:
    levels = cfg["noise"]["levels"]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        problems.append("noise.levels: must be strictly increasing")
    lo, hi = (cfg["noise"]["range"] + [0.0, 0.0])[:2]
    if len(cfg["noise"]["range"]) != 2:
        problems.append("noise.range: expected [lo, hi]")
    elif hi < lo:
        problems.append("noise.range: hi must be >= lo")


def validate_config(source=None) -> dict:
    """Normalize a config file, mapping, or None (all defaults).

    Raises ``ConfigError`` listing every offending dotted path.
    """
    if source is None:
        raw = {}
    elif isinstance(source, dict):
        raw = source
    else:
        text = Path(source).read_text()
        raw = yaml.safe_load(text)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError([f"config root must be a mapping, got {type(raw).__name__}"])
    problems: list = []
    cfg = _normalize(raw, SCHEMA, "", problems)
    _cross_checks(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def dump_config(cfg: dict, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg, sort_keys=True))


def _json_schema_for(opt: Option) -> dict:
    kind = opt.kind
    nullable = kind.startswith("opt[")
    if nullable:
        kind = kind[4:-1]
    base = {
        "int": {"type": "integer"},
        "float": {"type": "number"},
        "str": {"type": "string"},
        "bool": {"type": "boolean"},
        "list[float]": {"type": "array", "items": {"type": "number", "minimum": 0}},
    }[kind]
    schema = dict(base)
    if opt.choices is not None:
        schema["enum"] = list(opt.choices)
    if opt.minimum is not None and kind in ("int", "float"):
        key = "exclusiveMinimum" if opt.exclusive_min else "minimum"
        schema[key] = opt.minimum
    if opt.maximum is not None and kind in ("int", "float"):
        key = "exclusiveMaximum" if opt.exclusive_max else "maximum"
        schema[key] = opt.maximum
    if opt.doc:
        schema["description"] = opt.doc
    schema["default"] = opt.default
    if nullable:
        schema = {"anyOf": [schema, {"type": "null"}], "default": opt.default}
    return schema


def json_schema(schema: dict | None = None) -> dict:
    schema = schema if schema is not None else SCHEMA
    properties = {}
    for key, opt in schema.items():
        if isinstance(opt, dict):
            properties[key] = json_schema(opt)
        else:
            properties[key] = _json_schema_for(opt)
    return {
        "type": "object",
        "properties": properties,
        "additionalProperties": False,
    }
