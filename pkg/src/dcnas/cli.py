"""Single-binary command line: every stage is a subcommand.

Exit codes: 0 success, 2 usage/config error, 3 runtime error, 4 failed
built-in check.  Artifacts land in a per-run directory named by timestamp and
config hash; ``DCNAS_RUN_ROOT`` and ``DCNAS_DEVICE`` override the config.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import torch

from .config import json_schema, validate_config
from .data.synth import DatasetManifest, NoiseSpec, build_dataset, index_hash, load_dataset
from .errors import CheckFailure, ConfigError, DcnasError
from .presets import PRESETS, run_preset
from .profiler import FlopsConvention, LatencyProtocol, build_latency_lut, count_flops, measure_latency
from .reporting import emit_report, emit_search_trace_plots, read_trace_jsonl, write_trace_jsonl
from .runs import create_run_dir, record_inputs, resolve_device
from .search import SearchConfig, derive_architecture, run_search, search_data_from_synth
from .search.supernet import SupernetState
from .training import MetricsReport, TrainConfig, evaluate_sweep, load_checkpoint, train
from .zoo import resolve_model

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3
EXIT_CHECK = 4


def _parse_shape(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ConfigError([f"bad shape {text!r}; expected e.g. 1x3x224x224"]) from None


def _default_boxes(batch: int, size: int) -> torch.Tensor:
    second = max(0, min(size - 28, size - 28))
    boxes = [[0, 0, 28, 28], [second, second, 28, 28]]
    return torch.tensor([boxes] * batch, dtype=torch.int64)


def _load_cfg(args) -> dict:
    cfg = validate_config(getattr(args, "config", None))
    cfg["device"] = resolve_device(cfg)
    return cfg


def _noise_from_cfg(cfg: dict) -> NoiseSpec:
    return NoiseSpec(mode=cfg["noise"]["mode"],
                     levels=tuple(cfg["noise"]["levels"]),
                     range=tuple(cfg["noise"]["range"]))


def _cmd_dataset(args) -> int:
    cfg = _load_cfg(args)
    manifest = DatasetManifest(
        count=args.count or cfg["dataset"]["count"],
        seed=cfg["dataset"]["seed"] if args.seed is None else args.seed,
        canvas_size=cfg["dataset"]["canvas_size"],
        corpus=cfg["dataset"]["corpus"],
        out_dir=args.out or cfg["dataset"]["out_dir"],
    )
    build_dataset(manifest)
    print(f"built {manifest.count} samples at {manifest.out_dir} "
          f"(splits {manifest.split_sizes})")
    print(f"index hash: {index_hash(manifest.out_dir)}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    dataset = load_dataset(args.dataset)
    run_dir = create_run_dir(cfg, label=f"train-{args.model.replace(':', '_')}")
    record_inputs(run_dir, {"dataset_index": Path(args.dataset) / "index.json"})
    model = resolve_model(args.model, seed=cfg["seed"])
    t = cfg["train"]
    tc = TrainConfig(
        regime=t["regime"], optimizer=t["optimizer"], lr=t["lr"],
        momentum=t["momentum"], weight_decay=t["weight_decay"],
        scheduler=t["scheduler"], plateau_factor=t["plateau_factor"],
        plateau_patience=t["plateau_patience"], min_lr=t["min_lr"],
        epochs=args.epochs or t["epochs"], batch_size=t["batch_size"],
        loss=t["loss"], label_smoothing=t["label_smoothing"],
        noise=_noise_from_cfg(cfg), seed=t["seed"],
        checkpoint_every=t["checkpoint_every"], max_samples=t["max_samples"],
        out_dir=str(run_dir / "train"),
    )
    result = train(model, dataset, tc, resume_from=args.resume)
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"final train loss: {result.history[-1]['train_loss']:.6f}, "
          f"val loss: {result.history[-1]['val_loss']:.6f}")
    return EXIT_OK


def _cmd_search(args) -> int:
    cfg = _load_cfg(args)
    dataset = load_dataset(args.dataset)
    from .profiler import LatencyTable

    lut = LatencyTable.load(args.lut)
    run_dir = create_run_dir(cfg, label="search")
    record_inputs(run_dir, {"dataset_index": Path(args.dataset) / "index.json",
                            "lut": args.lut})
    s = cfg["search"]
    sc = SearchConfig(
        search_space=s["space"], macro=s["macro"],
        target_latency_ms=s["target_latency_ms"],
        latency_weight=s["latency_weight"],
        epochs=args.epochs or s["epochs"], batch_size=s["batch_size"],
        weight_lr=s["weight_lr"], weight_momentum=s["weight_momentum"],
        weight_decay=s["weight_decay"], alpha_lr=s["alpha_lr"],
        tau_start=s["tau_start"], tau_end=s["tau_end"],
        warmup_frac=s["warmup_frac"], split_ratio=s["split_ratio"],
        task_loss=s["task_loss"], label_smoothing=s["label_smoothing"],
        noise_policy=s["noise_policy"], hard=s["hard"],
        num_classes=s["num_classes"], seed=s["seed"],
    )
    data = search_data_from_synth(dataset, "train")
    trace, spec = run_search(data, sc, lut)
    write_trace_jsonl(trace, run_dir / "search.jsonl")
    spec.save(run_dir / "archspec.json")
    emit_search_trace_plots(trace, run_dir)
    print(f"derived choices: {list(spec.choices)}")
    print(f"archspec: {run_dir / 'archspec.json'}")
    return EXIT_OK


def _cmd_derive(args) -> int:
    trace = read_trace_jsonl(args.trace)
    if not trace:
        raise DcnasError(f"empty trace {args.trace}")
    head = trace[0]
    if "search_config" not in head:
        raise DcnasError("trace carries no search config; re-run the search")
    sc = SearchConfig(**head["search_config"])
    last = trace[-1]
    state = SupernetState(
        alphas=[np.asarray(a, dtype=np.float64) for a in last["alpha"]],
        tau=last["tau"], epoch=last["epoch"],
    )
    spec = derive_architecture(state, sc.macro, sc)
    out = args.out or str(Path(args.trace).with_name("archspec.json"))
    spec.save(out)
    print(f"archspec written to {out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    dataset = load_dataset(args.dataset)
    model = resolve_model(args.model, seed=cfg["seed"])
    if args.checkpoint:
        load_checkpoint(args.checkpoint, model)
    report = evaluate_sweep(
        model, dataset, _noise_from_cfg(cfg), seed=cfg["eval"]["seed"],
        batch_size=cfg["eval"]["batch_size"], model_id=args.model,
        max_samples=cfg["eval"]["max_samples"],
    )
    out = Path(args.out or "report.json")
    report.save(out)
    report.to_csv(out.with_suffix(".csv"))
    print(f"report: {out}")
    for key, value in report.means.items():
        if value is not None:
            print(f"mean {key}: {value:.4f}")
    return EXIT_OK


def _cmd_bench_latency(args) -> int:
    cfg = _load_cfg(args)
    shape = _parse_shape(args.input)
    if len(shape) != 3:
        raise ConfigError(["--input must be CxHxW for bench-latency"])
    model = resolve_model(args.model, in_ch=shape[0], seed=cfg["seed"])
    proto = LatencyProtocol(
        batch_size=args.batch or cfg["latency"]["batch_size"],
        warmup_iters=args.warmup if args.warmup is not None else cfg["latency"]["warmup_iters"],
        timed_iters=args.iters or cfg["latency"]["timed_iters"],
        device=cfg["device"], input_shape=shape,
    )
    fargs = ()
    if getattr(model, "task", "") == "joint":
        fargs = (_default_boxes(proto.batch_size, shape[-1]),)
    m = measure_latency(model, proto, forward_args=fargs)
    print(f"{m.milliseconds:.4f} ms/pass (std {m.std_ms:.4f}) "
          f"[batch={proto.batch_size}, warmup={proto.warmup_iters}, "
          f"iters={proto.timed_iters}, device={proto.device}]")
    return EXIT_OK


def _cmd_flops(args) -> int:
    cfg = _load_cfg(args)
    shape = _parse_shape(args.input)
    if len(shape) != 4:
        raise ConfigError(["--input must be BxCxHxW for flops"])
    model = resolve_model(args.model, in_ch=shape[1], seed=cfg["seed"])
    convention = FlopsConvention(macs_to_flops=cfg["flops"]["macs_to_flops"])
    fargs = ()
    if getattr(model, "task", "") == "joint":
        fargs = (_default_boxes(shape[0], shape[-1]),)
    report = count_flops(model, shape, convention, forward_args=fargs)
    print(f"{report.flops} FLOPs ({report.macs} MACs x factor "
          f"{convention.macs_to_flops}) at input {args.input}")
    return EXIT_OK


def _cmd_build_lut(args) -> int:
    cfg = _load_cfg(args)
    shape = _parse_shape(args.input)
    proto = LatencyProtocol(
        batch_size=args.batch or cfg["latency"]["batch_size"],
        warmup_iters=args.warmup if args.warmup is not None else cfg["latency"]["warmup_iters"],
        timed_iters=args.iters or cfg["latency"]["timed_iters"],
        device=cfg["device"], input_shape=shape,
    )
    lut = build_latency_lut(args.space, args.macro, proto,
                            num_classes=cfg["search"]["num_classes"])
    lut.save(args.out)
    print(f"latency table with {len(lut.entries)} entries "
          f"(overhead {lut.fixed_overhead_ms:.4f} ms) written to {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    written = []
    if args.reports:
        reports = [MetricsReport.load(p) for p in args.reports]
        written += emit_report(reports, args.out)
    if args.trace:
        written += emit_search_trace_plots(args.trace, args.out)
    if not written:
        raise ConfigError(["report needs --reports and/or --trace"])
    for path in written:
        print(path)
    return EXIT_OK


def _cmd_preset(args) -> int:
    cfg_source = getattr(args, "config", None)
    cfg = validate_config(cfg_source) if cfg_source else None
    summary, run_dir = run_preset(
        args.name, cfg=cfg, scale=args.scale, run_root=args.run_root,
        dry_run=args.dry_run, check=None if not args.no_check else False,
    )
    if args.dry_run:
        print(summary["plan"])
    else:
        print(f"run directory: {run_dir}")
        print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return EXIT_OK


def _cmd_schema(args) -> int:
    print(json.dumps(json_schema(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcnas",
        description="Latency-targeted search and training for joint "
                    "denoising + classification models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", default=None, help="YAML config file")
        p.set_defaults(func=fn)
        return p

    p = add("dataset", _cmd_dataset, "build the controlled two-digit dataset")
    p.add_argument("--out", default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = add("train", _cmd_train, "train a named model on a built dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--resume", default=None)

    p = add("search", _cmd_search, "run the differentiable architecture search")
    p.add_argument("--dataset", required=True)
    p.add_argument("--lut", required=True)
    p.add_argument("--epochs", type=int, default=None)

    p = add("derive", _cmd_derive, "discretize a search trace into an archspec")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", default=None)

    p = add("eval", _cmd_eval, "per-sigma evaluation sweep of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)

    p = add("bench-latency", _cmd_bench_latency, "measure model latency")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="CxHxW")
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)

    p = add("flops", _cmd_flops, "analytic FLOPs of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="BxCxHxW")

    p = add("build-lut", _cmd_build_lut, "measure the per-operator latency table")
    p.add_argument("--space", required=True)
    p.add_argument("--macro", required=True)
    p.add_argument("--input", required=True, help="CxHxW")
    p.add_argument("--out", required=True)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)

    p = add("report", _cmd_report, "emit comparison tables and plots")
    p.add_argument("--reports", nargs="*", default=[])
    p.add_argument("--trace", default=None)
    p.add_argument("--out", required=True)

    p = add("preset", _cmd_preset, "run a named experiment preset")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--scale", choices=("full", "smoke", "toy"), default="full")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--run-root", default=None)
    p.add_argument("--no-check", action="store_true")

    add("config-schema", _cmd_schema, "print the JSON schema of the config file")

    return parser


def cli(argv=None) -> int:
    """Entry point returning an exit code (0/2/3/4)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except DcnasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # unexpected faults still honor the exit contract
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> int:
    return cli()


if __name__ == "__main__":
    sys.exit(main())
