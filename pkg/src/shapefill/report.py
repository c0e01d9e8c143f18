"""Delimited outputs and the figures rendered alongside them."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

EVALUATION_SCHEMA = {
    "type": "object",
    "required": ["rows"],
    "properties": {
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["ratio", "mode", "mean_chamfer_normalized", "accuracy", "latency_ms_mean"],
                "properties": {
                    "ratio": {"type": "number"},
                    "mode": {"type": "string"},
                    "mean_chamfer_normalized": {"type": "number"},
                    "accuracy": {"type": ["number", "null"]},
                    "latency_ms_mean": {"type": ["number", "null"]},
                },
            },
        }
    },
}


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _new_axes(title, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_curves(path, xs, series, title, xlabel, ylabel, logy=False) -> None:
    """series: {label: y-values}; all aligned to xs."""
    fig, ax = _new_axes(title, xlabel, ylabel)
    for label, ys in series.items():
        ax.plot(xs, ys, label=label, linewidth=1.2)
    if logy:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend()
    _save(fig, path)


def plot_completion_report(path, rows) -> None:
    """Chamfer-vs-ratio lines per mode (the degradation-trend figure)."""
    modes = []
    for row in rows:
        if row["mode"] not in modes:
            modes.append(row["mode"])
    fig, ax = _new_axes("Completion quality vs missing data", "missing data (%)", "mean normalized Chamfer")
    for mode in modes:
        pts = [(row["ratio"], row["mean_chamfer_normalized"]) for row in rows if row["mode"] == mode]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=mode)
    ax.legend()
    _save(fig, path)


def plot_accuracy_report(path, rows) -> None:
    rows = [row for row in rows if row.get("accuracy") is not None]
    if not rows:
        return
    modes = []
    for row in rows:
        if row["mode"] not in modes:
            modes.append(row["mode"])
    fig, ax = _new_axes("Classification accuracy vs missing data", "missing data (%)", "accuracy")
    for mode in modes:
        pts = sorted((row["ratio"], row["accuracy"]) for row in rows if row["mode"] == mode)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=mode)
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    _save(fig, path)


def plot_latency_histogram(path, samples_ms, title="Seed-selection latency") -> None:
    fig, ax = _new_axes(title, "latency (ms)", "count")
    ax.hist(samples_ms, bins=40)
    _save(fig, path)


def plot_clouds(path, named_clouds, elev=20, azim=-60) -> None:
    """Side-by-side 3D scatters, e.g. partial input vs completion."""
    n = len(named_clouds)
    fig = plt.figure(figsize=(4.0 * n, 4.0))
    for i, (name, pts) in enumerate(named_clouds.items()):
        ax = fig.add_subplot(1, n, i + 1, projection="3d")
        ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], s=2)
        ax.set_title(name)
        ax.view_init(elev=elev, azim=azim)
        lim = max(1e-6, float(abs(pts).max()))
        for setter in (ax.set_xlim, ax.set_ylim, ax.set_zlim):
            setter(-lim, lim)
    _save(fig, path)
