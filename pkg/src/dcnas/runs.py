"""Run-directory provenance: every run records its normalized config, seeds,
and content hashes of the artifacts it consumed, so it can be replayed."""
from __future__ import annotations

import hashlib
import json
import os
import time
from pathlib import Path

from .config import dump_config

RUN_ROOT_ENV = "DCNAS_RUN_ROOT"
DEVICE_ENV = "DCNAS_DEVICE"


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def resolve_run_root(cfg: dict, override=None) -> Path:
    if override:
        return Path(override)
    return Path(os.environ.get(RUN_ROOT_ENV, cfg.get("run_root", "runs")))


def resolve_device(cfg: dict) -> str:
    return os.environ.get(DEVICE_ENV, cfg.get("device", "cpu"))


def create_run_dir(cfg: dict, run_root=None, label: str = "") -> Path:
    """Make ``<root>/<timestamp>-<confighash8>[-label][-n]`` and seed it."""
    root = resolve_run_root(cfg, run_root)
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = f"{stamp}-{config_hash(cfg)[:8]}" + (f"-{label}" if label else "")
    run_dir = root / base
    suffix = 0
    while run_dir.exists():
        suffix += 1
        run_dir = root / f"{base}-{suffix}"
    run_dir.mkdir(parents=True)
    dump_config(cfg, run_dir / "config.yaml")
    seeds = {
        "global": cfg.get("seed"),
        "dataset": cfg.get("dataset", {}).get("seed"),
        "train": cfg.get("train", {}).get("seed"),
        "search": cfg.get("search", {}).get("seed"),
        "eval": cfg.get("eval", {}).get("seed"),
    }
    (run_dir / "seeds.json").write_text(json.dumps(seeds, indent=2, sort_keys=True))
    return run_dir


def record_inputs(run_dir, inputs: dict) -> None:
    """Store content hashes of consumed artifacts (dataset index, LUT, ...)."""
    hashes = {}
    for name, path in inputs.items():
        path = Path(path)
        hashes[name] = {"path": str(path), "sha256": file_hash(path)}
    (Path(run_dir) / "inputs.json").write_text(
        json.dumps(hashes, indent=2, sort_keys=True))
