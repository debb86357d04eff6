"""Run reports: phase-profile tables, run comparisons, and figures.

Consumes the files a training run writes (profile.json plus the metrics,
trace, and ledger CSVs) and renders an aligned text table, a JSON report,
and PNG figures into an output directory.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .transfer import PHASES

PHASE_LABELS = {
    "to_worker": "transfer to-worker",
    "to_host": "transfer to-host",
    "forward": "forward",
    "backward": "backward",
    "update": "update",
    "l2_norm": "l2-norm monitor",
    "pack": "codec pack",
    "unpack": "codec unpack",
}

FIG_DPI = 150


@dataclass
class RunData:
    label: str
    profile: dict
    metrics: list[dict] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)


def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, newline="") as fp:
        return list(csv.DictReader(fp))


def load_run(run_dir: str | Path, label: str | None = None) -> RunData:
    """Load one training run's outputs; label defaults to its mode."""
    run_dir = Path(run_dir)
    profile_path = run_dir / "profile.json"
    if not profile_path.exists():
        raise FileNotFoundError(f"{run_dir} has no profile.json (not a training run directory?)")
    profile = json.loads(profile_path.read_text())
    return RunData(
        label=label or str(profile.get("mode", run_dir.name)),
        profile=profile,
        metrics=_read_csv(run_dir / "metrics.csv"),
        trace=_read_csv(run_dir / "trace.csv"),
    )


def _dedupe_labels(runs: list[RunData]) -> None:
    seen: dict[str, int] = {}
    for run in runs:
        count = seen.get(run.label, 0)
        seen[run.label] = count + 1
        if count:
            run.label = f"{run.label}#{count + 1}"


def render_profile_table(runs: list[RunData]) -> str:
    """Aligned phase table: wall and modeled seconds per run."""
    headers = ["phase"]
    for run in runs:
        headers += [f"{run.label} wall_s", f"{run.label} modeled_s"]
    rows = [headers]
    for name in PHASES:
        row = [PHASE_LABELS[name]]
        for run in runs:
            phase = run.profile.get("phases", {}).get(name, {})
            wall = phase.get("wall_s", 0.0)
            modeled = phase.get("modeled_link_s", phase.get("modeled_s"))
            row.append(f"{wall:.4f}")
            row.append("" if modeled is None else f"{modeled:.4f}")
        rows.append(row)

    summary = [
        ("accounted wall total", lambda p: _sum_wall(p), "{:.4f}"),
        ("batch loop wall", lambda p: p.get("loop_wall_s"), "{:.4f}"),
        ("weight stream raw B", lambda p: p.get("weight_stream", {}).get("raw_bytes"), "{}"),
        ("weight stream wire B", lambda p: p.get("weight_stream", {}).get("wire_bytes"), "{}"),
        ("weight stream ratio", lambda p: p.get("weight_stream", {}).get("ratio"), "{:.3f}"),
        ("final val top-1", lambda p: p.get("final_val_top1"), "{:.4f}"),
    ]
    rows.append([""] * len(headers))
    for title, getter, fmt in summary:
        row = [title]
        for run in runs:
            value = getter(run.profile)
            row += ["" if value is None else fmt.format(value), ""]
        rows.append(row)

    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _sum_wall(profile: dict) -> float:
    phases = profile.get("phases", {})
    return sum(phases.get(name, {}).get("wall_s", 0.0) for name in PHASES)


def build_report(runs: list[RunData]) -> dict:
    """JSON-ready report: per-run profiles plus a baseline comparison."""
    report: dict = {"runs": {run.label: run.profile for run in runs}}
    baseline = next((r for r in runs if r.profile.get("mode") == "baseline"), None)
    others = [r for r in runs if r is not baseline]
    if baseline is not None and others:
        base_wire = baseline.profile.get("weight_stream", {}).get("wire_bytes")
        base_acc = baseline.profile.get("final_val_top1")
        comparison = {}
        for run in others:
            wire = run.profile.get("weight_stream", {}).get("wire_bytes")
            acc = run.profile.get("final_val_top1")
            comparison[run.label] = {
                "weight_wire_fraction_of_baseline": (wire / base_wire) if base_wire and wire else None,
                "val_top1_delta": (acc - base_acc) if None not in (acc, base_acc) else None,
            }
        report["vs_baseline"] = comparison
    return report


def _metric_series(run: RunData, column: str, cast=float) -> tuple[list[int], list]:
    batches, values = [], []
    for row in run.metrics:
        raw = row.get(column, "")
        if raw != "":
            batches.append(int(row["batch"]))
            values.append(cast(raw))
    return batches, values


def _new_axes(xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=FIG_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def write_figures(runs: list[RunData], out_dir: Path) -> list[Path]:
    """Render the report figures; returns the written paths."""
    paths = []

    fig, ax = _new_axes("batch", "training loss")
    for run in runs:
        batches, losses = _metric_series(run, "loss")
        ax.plot(batches, losses, label=run.label, linewidth=1.0)
    ax.legend()
    paths.append(_save(fig, out_dir / "loss_curves.png"))

    fig, ax = _new_axes("batch", "validation top-1")
    for run in runs:
        batches, accs = _metric_series(run, "val_top1")
        ax.plot(batches, accs, marker="o", markersize=3, label=run.label)
    ax.legend()
    paths.append(_save(fig, out_dir / "val_accuracy.png"))

    fig, ax = _new_axes("batch", "cumulative wire bytes")
    for run in runs:
        batches, sent = _metric_series(run, "bytes_sent", cast=int)
        cumulative = []
        total = 0
        for b in sent:
            total += b
            cumulative.append(total)
        ax.plot(batches, cumulative, label=run.label)
    ax.legend()
    paths.append(_save(fig, out_dir / "wire_bytes.png"))

    traced = [run for run in runs if run.trace]
    if traced:
        fig, ax = _new_axes("batch", "bits per layer")
        for run in traced:
            per_layer: dict[int, tuple[list[int], list[int]]] = {}
            for row in run.trace:
                layer = int(row["layer"])
                per_layer.setdefault(layer, ([], []))
                per_layer[layer][0].append(int(row["batch"]))
                per_layer[layer][1].append(int(row["bits"]))
            for layer, (batches, bits) in sorted(per_layer.items()):
                ax.step(batches, bits, where="post", label=f"{run.label} layer {layer}")
        ax.set_yticks([8, 16, 24, 32])
        ax.legend(fontsize=7)
        paths.append(_save(fig, out_dir / "bits_per_layer.png"))

    fig, ax = _new_axes("wall seconds", "")
    labels = [PHASE_LABELS[name] for name in PHASES]
    y = list(range(len(PHASES)))
    bar_h = 0.8 / max(1, len(runs))
    for k, run in enumerate(runs):
        phases = run.profile.get("phases", {})
        values = [phases.get(name, {}).get("wall_s", 0.0) for name in PHASES]
        offset = [yy + (k - (len(runs) - 1) / 2) * bar_h for yy in y]
        ax.barh(offset, values, height=bar_h, label=run.label)
    ax.set_yticks(y)
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.legend()
    paths.append(_save(fig, out_dir / "phase_breakdown.png"))
    return paths


def write_report(run_dirs: list[str | Path], out_dir: str | Path) -> dict[str, object]:
    """Full report for one or more runs: table, JSON, and figures."""
    runs = [load_run(d) for d in run_dirs]
    _dedupe_labels(runs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    table = render_profile_table(runs)
    (out / "report.txt").write_text(table)
    report = build_report(runs)
    with open(out / "report.json", "w") as fp:
        json.dump(report, fp, indent=2, sort_keys=True)
        fp.write("\n")
    figures = write_figures(runs, out)
    return {"table": table, "report": report, "figures": figures}
