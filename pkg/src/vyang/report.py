"""Render figures from a finished run's delimited output.

Reads metrics.csv and curves.csv from an experiment directory and writes
PNG charts next to them: a per-mask metric bar chart and per-epoch
training curves. Rendering is headless; no display is required.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from vyang.experiment import MASK_ORDER, METRIC_COLUMNS


def _read_csv(path: Path) -> List[dict]:
    if not path.exists():
        raise FileNotFoundError(f"no {path.name} in {path.parent}; run an experiment first")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def render_metrics_figure(run_dir: Path, out_path: Path) -> Path:
    rows = [r for r in _read_csv(run_dir / "metrics.csv") if r["fold"] == "mean"]
    rows.sort(key=lambda r: MASK_ORDER.index(r["modalities"]))
    masks = [r["modalities"] for r in rows]
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(masks), 4.0))
    width = 0.2
    for i, column in enumerate(METRIC_COLUMNS):
        xs = [j + (i - 1.5) * width for j in range(len(masks))]
        ax.bar(xs, [float(r[column]) for r in rows], width=width, label=column)
    ax.set_xticks(range(len(masks)))
    ax.set_xticklabels(masks)
    ax.set_ylim(0, 100)
    ax.set_ylabel("percent")
    ax.set_xlabel("modalities")
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title("test metrics by modality combination")
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def render_curves_figure(run_dir: Path, out_path: Path) -> Path:
    rows = _read_csv(run_dir / "curves.csv")
    series: Dict[tuple, List[dict]] = {}
    for r in rows:
        series.setdefault((r["modalities"], r["fold"], r["split"]), []).append(r)
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4.0))
    for (mask, fold, split), recs in sorted(series.items()):
        recs.sort(key=lambda r: int(r["epoch"]))
        epochs = [int(r["epoch"]) for r in recs]
        style = "--" if split == "val" else "-"
        label = f"{mask} {fold} {split}"
        ax_loss.plot(epochs, [float(r["loss"]) for r in recs], style,
                     label=label, linewidth=1.0)
        ax_acc.plot(epochs, [float(r["accuracy"]) for r in recs], style,
                    label=label, linewidth=1.0)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.set_title("training loss")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy (%)")
    ax_acc.set_ylim(0, 100)
    ax_acc.set_title("training accuracy")
    if len(series) <= 12:
        ax_loss.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def render_report(run_dir) -> List[Path]:
    """Write metrics.png and curves.png next to a run's CSV output."""
    run_dir = Path(run_dir)
    written = [render_metrics_figure(run_dir, run_dir / "metrics.png")]
    if (run_dir / "curves.csv").exists():
        written.append(render_curves_figure(run_dir, run_dir / "curves.png"))
    return written
