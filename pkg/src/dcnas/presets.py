"""Experiment presets: named multi-stage pipelines with built-in checks.

Each preset runs at one of three scales:

* ``full``  — the complete study protocol (hours on a GPU for the training
  presets),
* ``smoke`` — same pipeline with a 30-epoch training budget,
* ``toy``   — minutes on a CPU; exercises every stage end-to-end but skips
  the performance checks, which are only meaningful at full/smoke scale.

A failed built-in check raises ``CheckFailure`` (CLI exit code 4).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import validate_config
from .data.synth import DatasetManifest, NoiseSpec, build_dataset, load_dataset
from .errors import CheckFailure, DcnasError
from .losses import ce_label_smoothing, charbonnier, combined_loss, ssim_loss
from .models import UNetConfig, make_unet, random_archspec
from .models.nas_models import DECODER_VARIANTS, build_dcnas, build_decoder_variant
from .profiler import (
    LatencyProtocol,
    build_latency_lut,
    count_flops,
    estimate_latency,
    measure_latency,
)
from .reporting import emit_report, emit_search_trace_plots, write_trace_jsonl
from .runs import create_run_dir, record_inputs
from .search import SearchConfig, get_search_space, run_search, search_data_from_synth
from .training import TrainConfig, evaluate_sweep, train
from .zoo import resolve_model

SCALES = ("full", "smoke", "toy")


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    description: str
    stages: tuple
    expected_artifacts: tuple
    runner: object

    def plan(self, scale: str) -> str:
        lines = [f"preset {self.name} (scale={scale}): {self.description}"]
        lines += [f"  {i + 1}. {stage}" for i, stage in enumerate(self.stages)]
        lines.append("  artifacts: " + ", ".join(self.expected_artifacts))
        return "\n".join(lines)


def _dataset_for(cfg: dict, run_dir: Path, count: int, seed: int):
    """Load the configured dataset if present and matching, else build one."""
    out_dir = Path(cfg["dataset"]["out_dir"])
    if (out_dir / "index.json").exists():
        ds = load_dataset(out_dir)
        if ds.manifest.count == count and ds.manifest.seed == seed:
            return ds
    manifest = DatasetManifest(
        count=count, seed=seed, canvas_size=cfg["dataset"]["canvas_size"],
        corpus=cfg["dataset"]["corpus"], out_dir=str(run_dir / "dataset"),
    )
    return build_dataset(manifest)


def _sigma_grid(cfg: dict, toy: bool) -> NoiseSpec:
    levels = cfg["noise"]["levels"]
    if toy:
        levels = levels[:: max(1, len(levels) // 4)]  # thin the grid
    return NoiseSpec(mode="grid", levels=tuple(levels))


def _latency_protocol(cfg: dict, toy: bool, input_shape) -> LatencyProtocol:
    lat = cfg["latency"]
    if toy:
        return LatencyProtocol(batch_size=2, warmup_iters=3, timed_iters=10,
                               device=cfg["device"], input_shape=input_shape)
    return LatencyProtocol(batch_size=lat["batch_size"],
                           warmup_iters=lat["warmup_iters"],
                           timed_iters=lat["timed_iters"],
                           device=cfg["device"], input_shape=input_shape)


def _train_eval_one(model, model_id: str, dataset, cfg: dict, run_dir: Path,
                    epochs: int, noise: NoiseSpec, toy: bool,
                    max_train: int | None, max_eval: int | None):
    tc = TrainConfig.controlled(
        epochs=epochs, batch_size=cfg["train"]["batch_size"],
        lr=cfg["train"]["lr"], noise=noise, seed=cfg["train"]["seed"],
        max_samples=max_train, out_dir=str(run_dir / f"train-{model_id}"),
    )
    train(model, dataset, tc)
    report = evaluate_sweep(model, dataset, noise, seed=cfg["eval"]["seed"],
                            batch_size=cfg["eval"]["batch_size"],
                            model_id=model_id, max_samples=max_eval)
    canvas = dataset.manifest.canvas_size
    flops = count_flops(model, (1, 1, canvas, canvas),
                        forward_args=(torch.from_numpy(
                            dataset.boxes["test"][:1]),)
                        if getattr(model, "task", "") == "joint" else ())
    report.flops = flops.flops
    report.flops_convention = {"macs_to_flops": flops.convention.macs_to_flops}
    proto = _latency_protocol(cfg, toy, (1, canvas, canvas))
    args = (torch.from_numpy(np.repeat(dataset.boxes["test"][:1],
                                       proto.batch_size, axis=0)),) \
        if getattr(model, "task", "") == "joint" else ()
    measurement = measure_latency(model, proto, forward_args=args)
    report.latency_ms = measurement.milliseconds
    report.latency_protocol = proto.to_dict()
    report.save(run_dir / f"report-{model_id}.json")
    report.to_csv(run_dir / f"report-{model_id}.csv")
    return report


def _joint_study(cfg, run_dir, scale, check, size: str):
    toy = scale == "toy"
    epochs = {"full": 100, "smoke": 30, "toy": 2}[scale]
    count = {"full": 30000, "smoke": 30000, "toy": 400}[scale]
    max_eval = 100 if toy else None
    dataset = _dataset_for(cfg, run_dir, count, cfg["dataset"]["seed"])
    noise = _sigma_grid(cfg, toy)

    integrated = resolve_model(f"dcnet-integrated-{size}", seed=cfg["seed"])
    sequential = resolve_model(f"dcnet-sequential-{size}", seed=cfg["seed"] + 1)
    rep_int = _train_eval_one(integrated, f"integrated-{size}", dataset, cfg,
                              run_dir, epochs, noise, toy, None, max_eval)
    rep_seq = _train_eval_one(sequential, f"sequential-{size}", dataset, cfg,
                              run_dir, epochs, noise, toy, None, max_eval)
    emit_report([rep_int, rep_seq], run_dir, basename="comparison")

    summary = {
        "psnr_gap_db": rep_int.means["psnr"] - rep_seq.means["psnr"],
        "ssim_gap": rep_int.means["ssim"] - rep_seq.means["ssim"],
        "accuracy_gap_pct": rep_seq.means["accuracy"] - rep_int.means["accuracy"],
        "integrated": rep_int.means,
        "sequential": rep_seq.means,
        "latency_ms": {"integrated": rep_int.latency_ms,
                       "sequential": rep_seq.latency_ms},
        "epochs": epochs,
        "samples": count,
    }
    if check:
        problems = []
        if not summary["psnr_gap_db"] >= 2.0:
            problems.append(
                f"integrated PSNR advantage {summary['psnr_gap_db']:.2f} dB < 2.0 dB")
        if not summary["accuracy_gap_pct"] >= -0.5:
            problems.append(
                f"sequential accuracy should be within 0.5% of integrated, "
                f"gap {summary['accuracy_gap_pct']:.2f}%")
        if not abs(summary["accuracy_gap_pct"]) <= 4.0:
            problems.append(
                f"|accuracy gap| {abs(summary['accuracy_gap_pct']):.2f}% > 4%")
        if not summary["ssim_gap"] >= 0.0:
            problems.append(f"integrated SSIM below sequential by {-summary['ssim_gap']:.4f}")
        if problems:
            raise CheckFailure("; ".join(problems))
    return summary


def _run_table1_reduced(cfg, run_dir, scale, check):
    return _joint_study(cfg, run_dir, scale, check, "reduced")


def _run_table1_baseline(cfg, run_dir, scale, check):
    return _joint_study(cfg, run_dir, scale, check, "baseline")


UNET_SWEEPS_FULL = {
    "b": [UNetConfig(b=b, d=4, m=2.0, c=2) for b in (4, 8, 16, 32, 64)],
    "d": [UNetConfig(b=b, d=d, m=2.0, c=2) for b in (8, 16, 32) for d in (2, 3, 4, 5)],
    "c": [UNetConfig(b=b, d=4, m=2.0, c=c) for b in (8, 16, 32, 64) for c in (1, 2)],
    "m": [UNetConfig(b=8, d=4, m=m, c=2) for m in (1.0, 1.5, 2.0)],
}
UNET_SWEEPS_TOY = {
    "b": [UNetConfig(b=b, d=2, m=2.0, c=1) for b in (4, 8)],
    "m": [UNetConfig(b=4, d=2, m=m, c=1) for m in (1.0, 2.0)],
}


def _run_unet_scaling(cfg, run_dir, scale, check):
    toy = scale == "toy"
    sweeps = UNET_SWEEPS_TOY if toy else UNET_SWEEPS_FULL
    epochs = {"full": 100, "smoke": 30, "toy": 2}[scale]
    count = {"full": 30000, "smoke": 30000, "toy": 200}[scale]
    dataset = _dataset_for(cfg, run_dir, count, cfg["dataset"]["seed"])
    noise = _sigma_grid(cfg, toy)
    rows = []
    for param, configs in sweeps.items():
        for ucfg in configs:
            torch.manual_seed(cfg["seed"])
            model = make_unet(ucfg, in_ch=1, out_ch=1)
            model_id = f"unet-b{ucfg.b}d{ucfg.d}m{ucfg.m}c{ucfg.c}"
            tc = TrainConfig.controlled(
                epochs=epochs, batch_size=cfg["train"]["batch_size"],
                noise=noise, seed=cfg["train"]["seed"],
                out_dir=str(run_dir / f"train-{model_id}"))
            train(model, dataset, tc)
            report = evaluate_sweep(model, dataset, noise,
                                    seed=cfg["eval"]["seed"], model_id=model_id,
                                    max_samples=100 if toy else None)
            canvas = dataset.manifest.canvas_size
            flops = count_flops(model, (1, 1, canvas, canvas))
            rows.append({"sweep": param, "config": model_id,
                         "flops": flops.flops, "psnr": report.means["psnr"],
                         "ssim": report.means["ssim"]})
    _write_rows(run_dir / "unet-scaling.csv", rows)
    return {"rows": rows}


def _run_classifier_scaling(cfg, run_dir, scale, check):
    toy = scale == "toy"
    names = ("conv-l", "mb2.5-m") if toy else (
        "conv-l", "mb1-s", "mb2.5-m", "mb4-l", "mb2.5-s", "mb4-s", "conv-s", "conv-m")
    epochs = {"full": 100, "smoke": 30, "toy": 2}[scale]
    count = {"full": 30000, "smoke": 30000, "toy": 200}[scale]
    dataset = _dataset_for(cfg, run_dir, count, cfg["dataset"]["seed"])
    noise = _sigma_grid(cfg, toy)
    rows = []
    for name in names:
        model = resolve_model(name, seed=cfg["seed"])
        tc = TrainConfig.controlled(
            epochs=epochs, batch_size=cfg["train"]["batch_size"], noise=noise,
            seed=cfg["train"]["seed"], out_dir=str(run_dir / f"train-{name}"))
        train(model, dataset, tc)
        report = evaluate_sweep(model, dataset, noise, seed=cfg["eval"]["seed"],
                                model_id=name, max_samples=100 if toy else None)
        flops = count_flops(model, (1, 1, 28, 28))
        rows.append({"model": name, "flops": flops.flops,
                     "accuracy": report.means["accuracy"]})
    _write_rows(run_dir / "classifier-scaling.csv", rows)
    return {"rows": rows}


def _search_once(cfg, dataset, lut, seed: int, epochs: int, space: str,
                 target: float):
    sc = SearchConfig(
        search_space=space, macro=cfg["search"]["macro"],
        target_latency_ms=target, latency_weight=cfg["search"]["latency_weight"],
        epochs=epochs, batch_size=cfg["search"]["batch_size"],
        weight_lr=cfg["search"]["weight_lr"], alpha_lr=cfg["search"]["alpha_lr"],
        tau_start=cfg["search"]["tau_start"], tau_end=cfg["search"]["tau_end"],
        warmup_frac=cfg["search"]["warmup_frac"],
        split_ratio=cfg["search"]["split_ratio"],
        noise_policy=cfg["search"]["noise_policy"], hard=cfg["search"]["hard"],
        num_classes=cfg["search"]["num_classes"], seed=seed,
    )
    data = search_data_from_synth(dataset, "train")
    return run_search(data, sc, lut), sc


def _run_search_smoke(cfg, run_dir, scale, check):
    count = 1000
    epochs = 5
    dataset = _dataset_for(cfg, run_dir, count, cfg["dataset"]["seed"])
    proto = _latency_protocol(cfg, True, (1, 28, 28))
    lut = build_latency_lut(cfg["search"]["space"], cfg["search"]["macro"], proto,
                            num_classes=cfg["search"]["num_classes"])
    lut.save(run_dir / "lut.json")
    # target the uniform-mixture expectation so the penalty is active but
    # satisfiable on whatever device built the table
    uniform = [[1.0 / len(lut.candidates)] * len(lut.candidates)
               for _ in range(len(lut.positions()))]
    target = float(estimate_latency(uniform, lut))

    (trace, spec), _ = _search_once(cfg, dataset, lut, cfg["search"]["seed"],
                                    epochs, cfg["search"]["space"], target)
    (trace2, spec2), _ = _search_once(cfg, dataset, lut, cfg["search"]["seed"],
                                      epochs, cfg["search"]["space"], target)
    write_trace_jsonl(trace, run_dir / "search.jsonl")
    spec.save(run_dir / "archspec.json")
    emit_search_trace_plots(trace, run_dir)
    summary = {
        "choices": list(spec.choices),
        "deterministic": spec.choices == spec2.choices,
        "entropy_start": float(np.mean(trace[0]["entropy"])),
        "entropy_end": float(np.mean(trace[-1]["entropy"])),
        "target_latency_ms": target,
        "est_latency_ms": trace[-1]["est_latency_ms"],
    }
    if check and not summary["deterministic"]:
        raise CheckFailure("repeated search with a fixed seed derived different choices")
    return summary


def _run_searchspace_sweep(cfg, run_dir, scale, check):
    toy = scale == "toy"
    count = {"full": 30000, "smoke": 4000, "toy": 400}[scale]
    epochs = {"full": 90, "smoke": 10, "toy": 2}[scale]
    dataset = _dataset_for(cfg, run_dir, count, cfg["dataset"]["seed"])
    proto = _latency_protocol(cfg, toy, (1, 28, 28))
    rows = []
    for space in ("size-4", "size-6", "size-8"):
        lut = build_latency_lut(space, cfg["search"]["macro"], proto,
                                num_classes=cfg["search"]["num_classes"])
        lut.save(run_dir / f"lut-{space}.json")
        n_cand = len(lut.candidates)
        uniform = [[1.0 / n_cand] * n_cand for _ in range(len(lut.positions()))]
        base = float(estimate_latency(uniform, lut))
        targets = [base] if toy else [base * f for f in (0.8, 1.0, 1.2)]
        for target in targets:
            (trace, spec), _ = _search_once(cfg, dataset, lut,
                                            cfg["search"]["seed"], epochs,
                                            space, target)
            write_trace_jsonl(trace, run_dir / f"search-{space}-{target:.3f}.jsonl")
            spec.save(run_dir / f"archspec-{space}-{target:.3f}.json")
            rows.append({"space": space, "target_ms": target,
                         "est_ms": trace[-1]["est_latency_ms"],
                         "choices": list(spec.choices)})
    _write_rows(run_dir / "searchspace-sweep.csv", rows)
    return {"rows": rows}


def _run_dcnas_shape(cfg, run_dir, scale, check):
    rng = np.random.default_rng(cfg["seed"])
    space = get_search_space("size-8")
    spec = random_archspec("S", space, rng, target_latency_ms=10.0)
    spec.save(run_dir / "archspec.json")
    model = build_dcnas(spec, num_classes=100, seed=cfg["seed"])

    batch = 2
    torch.manual_seed(cfg["seed"])
    x = torch.rand(batch, 3, 224, 224)
    clean = torch.rand(batch, 3, 224, 224)
    labels = torch.randint(0, 100, (batch,))
    problems = []

    denoised, logits = model(x)
    if tuple(denoised.shape) != (batch, 3, 224, 224):
        problems.append(f"denoised shape {tuple(denoised.shape)}")
    if tuple(logits.shape) != (batch, 100):
        problems.append(f"logits shape {tuple(logits.shape)}")

    def loss_both():
        den, lg = model(x)
        return combined_loss("both", {
            "ce": ce_label_smoothing(lg, labels),
            "char": charbonnier(den, clean),
            "ssim_loss": ssim_loss(den, clean),
        })

    before = loss_both()
    opt = torch.optim.SGD(model.parameters(), lr=1e-3)
    opt.zero_grad()
    before.backward()
    opt.step()
    before_v = float(before.detach())
    after = float(loss_both().detach())
    improved = after < before_v
    if not improved:  # fall back to a smaller step from the updated point
        opt = torch.optim.SGD(model.parameters(), lr=1e-4)
        before2 = loss_both()
        opt.zero_grad()
        before2.backward()
        opt.step()
        before_v = float(before2.detach())
        after = float(loss_both().detach())
        improved = after < before_v
    if not improved:
        problems.append("one optimization step did not reduce the combined loss")

    variant_shapes = {}
    for variant in DECODER_VARIANTS:
        vm = build_decoder_variant(spec, variant, num_classes=100, seed=cfg["seed"])
        with torch.no_grad():
            vden, vlog = vm(torch.rand(1, 3, 224, 224))
        variant_shapes[variant] = list(vden.shape)
        if tuple(vden.shape) != (1, 3, 224, 224) or tuple(vlog.shape) != (1, 100):
            problems.append(f"variant {variant}: shapes {tuple(vden.shape)}, "
                            f"{tuple(vlog.shape)}")

    summary = {
        "spec_hash": spec.content_hash(),
        "loss_before": before_v,
        "loss_after": after,
        "variants": variant_shapes,
        "problems": problems,
    }
    if check and problems:
        raise CheckFailure("; ".join(problems))
    return summary


def _write_rows(path: Path, rows: list) -> None:
    import csv

    if not rows:
        return
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)


PRESETS = {
    "table1-reduced": ExperimentPreset(
        name="table1-reduced",
        description="integrated vs sequential joint study on the controlled "
                    "set at the reduced size (UNet-S backbone, MB2.5-M head)",
        stages=("dataset", "train integrated", "train sequential",
                "eval integrated", "eval sequential", "report", "check"),
        expected_artifacts=("report-integrated-reduced.json",
                            "report-sequential-reduced.json", "comparison.csv"),
        runner=_run_table1_reduced,
    ),
    "table1-baseline": ExperimentPreset(
        name="table1-baseline",
        description="integrated vs sequential joint study at the baseline size",
        stages=("dataset", "train integrated", "train sequential",
                "eval integrated", "eval sequential", "report", "check"),
        expected_artifacts=("report-integrated-baseline.json",
                            "report-sequential-baseline.json", "comparison.csv"),
        runner=_run_table1_baseline,
    ),
    "unet-scaling": ExperimentPreset(
        name="unet-scaling",
        description="denoiser hyperparameter sweep over b/d/m/c",
        stages=("dataset", "train+eval sweep", "report"),
        expected_artifacts=("unet-scaling.csv",),
        runner=_run_unet_scaling,
    ),
    "classifier-scaling": ExperimentPreset(
        name="classifier-scaling",
        description="manual classifier operator / width / expansion study",
        stages=("dataset", "train+eval presets", "report"),
        expected_artifacts=("classifier-scaling.csv",),
        runner=_run_classifier_scaling,
    ),
    "search-smoke": ExperimentPreset(
        name="search-smoke",
        description="tiny deterministic search: 3 searchable layers, 4 "
                    "candidates, 1k samples, 5 epochs",
        stages=("dataset", "latency table", "search x2 (determinism)",
                "derive", "trace plots", "check"),
        expected_artifacts=("lut.json", "search.jsonl", "archspec.json",
                            "search-entropy.png"),
        runner=_run_search_smoke,
    ),
    "searchspace-sweep": ExperimentPreset(
        name="searchspace-sweep",
        description="search-space size sweep {4,6,8} across latency targets",
        stages=("dataset", "per-space latency table", "per-target search",
                "report"),
        expected_artifacts=("searchspace-sweep.csv",),
        runner=_run_searchspace_sweep,
    ),
    "dcnas-shape": ExperimentPreset(
        name="dcnas-shape",
        description="joint searched-model construction checks: shapes, one "
                    "optimization step, decoder variants",
        stages=("random archspec", "build + forward", "loss step",
                "decoder variants", "check"),
        expected_artifacts=("archspec.json", "summary.json"),
        runner=_run_dcnas_shape,
    ),
}


def run_preset(name: str, cfg: dict | None = None, scale: str = "full",
               run_root=None, dry_run: bool = False, check: bool | None = None):
    """Execute a preset; returns (summary, run_dir).  ``dry_run`` only plans."""
    if name not in PRESETS:
        raise DcnasError(f"unknown preset {name!r}; use one of {sorted(PRESETS)}")
    if scale not in SCALES:
        raise DcnasError(f"unknown scale {scale!r}; use one of {SCALES}")
    preset = PRESETS[name]
    if dry_run:
        return {"plan": preset.plan(scale)}, None
    cfg = validate_config(cfg)
    if check is None:
        check = scale != "toy"
    run_dir = create_run_dir(cfg, run_root=run_root, label=name)
    summary = preset.runner(cfg, run_dir, scale, check)
    import json

    (run_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True, default=str))
    dataset_index = Path(cfg["dataset"]["out_dir"]) / "index.json"
    inputs = {}
    if dataset_index.exists():
        inputs["dataset_index"] = dataset_index
    elif (run_dir / "dataset" / "index.json").exists():
        inputs["dataset_index"] = run_dir / "dataset" / "index.json"
    if inputs:
        record_inputs(run_dir, inputs)
    return summary, run_dir
