"""Figures and plain-text tables for evaluation reports."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Mapping, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "bgshift",
}
# no timestamps or version strings, so reruns produce identical files
_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    plt.close(fig)


def plot_pr_curves(curves: Mapping[str, Tuple[np.ndarray, np.ndarray]], path, title: str = "") -> None:
    """One precision/recall line per named curve."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.4))
        for name, (recall, precision) in curves.items():
            if recall.size:
                ax.step(np.r_[0.0, recall], np.r_[precision[0], precision], where="post", label=name)
        ax.set_xlim(0, 1.02)
        ax.set_ylim(0, 1.05)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        if title:
            ax.set_title(title)
        ax.legend(loc="lower left", frameon=False)
        fig.tight_layout()
        _save(fig, path)


def plot_robustness(clean: float, corrupted: Mapping[str, float], path) -> None:
    """Bar chart of FULL AP under each corruption, with the clean score as a reference line."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.6, 3.2))
        names = list(corrupted)
        ax.bar(range(len(names)), [100 * corrupted[n] for n in names], color="#5b7fa6")
        ax.axhline(100 * clean, color="#b5523b", linestyle="--", linewidth=1, label="clean")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels([n.replace("_", "\n") for n in names])
        ax.set_ylabel("FULL AP (%)")
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def metrics_table(metrics: Dict) -> str:
    """Fixed-width text rendering of the metrics report."""
    lines = [f"{'metric':<24}{'value':>10}", "-" * 34]
    for part in ("FULL", "PRES", "ABS"):
        v = metrics["ap"].get(part)
        lines.append(f"{'AP ' + part:<24}{_fmt(v):>10}")
    for name, v in sorted(metrics.get("corrupted_full", {}).items()):
        lines.append(f"{'FULL ' + name:<24}{_fmt(v):>10}")
    if "mFULL" in metrics:
        lines.append(f"{'mFULL':<24}{_fmt(metrics['mFULL']):>10}")
        r = metrics.get("rFULL")
        lines.append(f"{'rFULL (%)':<24}{'n/a' if r is None else f'{r:.1f}':>10}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return "n/a" if v is None else f"{100 * v:.1f}"
