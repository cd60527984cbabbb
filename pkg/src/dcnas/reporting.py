"""Report emission: comparison tables (CSV + text) and plot files."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ReportError  # noqa: E402

METRIC_KEYS = ("psnr", "ssim", "accuracy")


def _check_grids(reports) -> tuple:
    grids = {r.sigmas() for r in reports}
    if len(grids) != 1:
        raise ReportError(
            f"reports use different sigma grids: {sorted(grids)}"
        )
    return next(iter(grids))


def emit_report(reports, out_dir, basename: str = "comparison") -> list:
    """Write CSV + text tables and per-sigma curves for >= 1 reports.

    With exactly two reports the table carries delta columns
    (first minus second).  Returns the written paths.
    """
    if not reports:
        raise ReportError("need at least one report")
    sigmas = _check_grids(reports)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    with_delta = len(reports) == 2
    header = ["sigma"]
    for r in reports:
        header += [f"{key}:{r.model_id}" for key in METRIC_KEYS]
    if with_delta:
        header += [f"delta_{key}" for key in METRIC_KEYS]

    def metric_rows():
        for i, sigma in enumerate(sigmas):
            row = [sigma]
            for r in reports:
                row += [r.rows[i].get(key) for key in METRIC_KEYS]
            if with_delta:
                for key in METRIC_KEYS:
                    a = reports[0].rows[i].get(key)
                    b = reports[1].rows[i].get(key)
                    row.append(None if a is None or b is None else a - b)
            yield row
        mean_row = ["mean"]
        for r in reports:
            mean_row += [r.means.get(key) for key in METRIC_KEYS]
        if with_delta:
            for key in METRIC_KEYS:
                a = reports[0].means.get(key)
                b = reports[1].means.get(key)
                mean_row.append(None if a is None or b is None else a - b)
        yield mean_row

    csv_path = out_dir / f"{basename}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in metric_rows():
            writer.writerow(row)
    written.append(csv_path)

    txt_path = out_dir / f"{basename}.txt"
    widths = [max(len(str(h)), 10) for h in header]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    for row in metric_rows():
        cells = ["" if v is None else (f"{v:.4f}" if isinstance(v, float) else str(v))
                 for v in row]
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    txt_path.write_text("\n".join(lines) + "\n")
    written.append(txt_path)

    for key, ylabel in (("psnr", "PSNR (dB)"), ("accuracy", "accuracy (%)"),
                        ("ssim", "SSIM")):
        if not any(any(r.rows[i].get(key) is not None for i in range(len(sigmas)))
                   for r in reports):
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for r in reports:
            ys = [r.rows[i].get(key) for i in range(len(sigmas))]
            if all(y is None for y in ys):
                continue
            ax.plot(sigmas, ys, marker="o", label=r.model_id)
        ax.set_xlabel("noise sigma")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        fig.tight_layout()
        png_path = out_dir / f"{basename}-{key}.png"
        fig.savefig(png_path, dpi=110)
        plt.close(fig)
        written.append(png_path)

    return written


def write_trace_jsonl(trace, path) -> None:
    Path(path).write_text("".join(json.dumps(rec) + "\n" for rec in trace))


def read_trace_jsonl(path) -> list:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line]


def emit_search_trace_plots(trace, out_dir, basename: str = "search") -> list:
    """Entropy-per-layer and estimated-latency curves over epochs."""
    if isinstance(trace, (str, Path)):
        trace = read_trace_jsonl(trace)
    if not trace:
        raise ReportError("empty search trace")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    epochs = [rec["epoch"] for rec in trace]
    written = []

    fig, ax = plt.subplots(figsize=(5, 3.5))
    num_layers = len(trace[0]["entropy"])
    for layer in range(num_layers):
        ax.plot(epochs, [rec["entropy"][layer] for rec in trace],
                alpha=0.6, label=f"layer {layer}")
    ax.plot(epochs, [sum(rec["entropy"]) / num_layers for rec in trace],
            color="black", linewidth=2, label="mean")
    ax.set_xlabel("epoch")
    ax.set_ylabel("selection entropy (nats)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    entropy_path = out_dir / f"{basename}-entropy.png"
    fig.savefig(entropy_path, dpi=110)
    plt.close(fig)
    written.append(entropy_path)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(epochs, [rec["est_latency_ms"] for rec in trace], marker="o")
    ax.set_xlabel("epoch")
    ax.set_ylabel("estimated latency (ms)")
    fig.tight_layout()
    latency_path = out_dir / f"{basename}-latency.png"
    fig.savefig(latency_path, dpi=110)
    plt.close(fig)
    written.append(latency_path)

    return written
