"""Figure rendering for the report paths (headless Agg backend, files only)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from coverkit.metrics import METRICS, EvalTable  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-stable
    fig.savefig(path, dpi=100, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def plot_coverage_curves(curves: Mapping[int, Sequence[tuple[int, float]]], path) -> Path:
    """Mean accumulated coverage vs. candidate depth, one line per threshold tau."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for tau in sorted(curves):
        pts = curves[tau]
        ax.plot([k for k, _ in pts], [c for _, c in pts], label=f"tau={tau}")
    ax.set_xlabel("candidates inspected (k)")
    ax.set_ylabel("accumulated coverage")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_eval(tables: Mapping[str, EvalTable], path) -> Path:
    """Grouped bars of mean metrics per run."""
    names = list(tables)
    fig, ax = plt.subplots(figsize=(max(5.0, 1.2 * len(names) + 3), 3.8))
    width = 0.8 / max(1, len(names))
    for j, name in enumerate(names):
        vals = [tables[name].mean(m) for m in METRICS]
        ax.bar([i + j * width for i in range(len(METRICS))], vals, width, label=name)
    k = next(iter(tables.values())).k if tables else 10
    ax.set_xticks([i + width * (len(names) - 1) / 2 for i in range(len(METRICS))])
    ax.set_xticklabels([f"{m}@{k}" for m in METRICS])
    ax.set_ylim(0, 1.0)
    ax.legend(fontsize="small")
    return _save(fig, path)


def plot_ablation(rows, path) -> Path:
    """Horizontal bars of Cov@10 / alpha-nDCG@10 deltas per ablation variant."""
    labels = [r.name for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 0.45 * len(rows) + 1.5))
    ys = range(len(rows))
    ax.barh([y - 0.2 for y in ys], [r.delta("Cov") for r in rows], 0.4, label="delta Cov@10")
    ax.barh([y + 0.2 for y in ys], [r.delta("alpha-nDCG") for r in rows], 0.4, label="delta alpha-nDCG@10")
    ax.set_yticks(list(ys))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.axvline(0, color="black", lw=0.8)
    ax.legend(fontsize="small")
    return _save(fig, path)
