"""Figure rendering for the report commands.

Figures are for inspection only; the numbers behind them are always
written to CSV as well. SVG output carries no date stamp and uses a fixed
hash salt so reruns produce the same file.
"""
from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "dmfreq",
    "svg.fonttype": "path",
    "figure.figsize": (5.0, 3.2),
}

PALETTE = ("#2ca02c", "#1f77b4", "#d62728", "#9467bd", "#ff7f0e", "#8c564b")


def _save(fig, path) -> None:
    fmt = str(path).rsplit(".", 1)[-1].lower()
    metadata = {"Date": None} if fmt == "svg" else None
    fig.savefig(path, metadata=metadata)
    plt.close(fig)


def line_with_band(path, x, series: Sequence[tuple[str, np.ndarray, np.ndarray, np.ndarray]],
                   xlabel: str, ylabel: str, title: str = "", xlim=None) -> None:
    """Mean curves with shaded confidence bands.

    ``series`` holds ``(label, mean, lower, upper)`` tuples sharing ``x``.
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(layout="constrained")
        for (label, mean, lo, hi), color in zip(series, PALETTE):
            ax.fill_between(x, lo, hi, color=color, alpha=0.25, linewidth=0)
            ax.plot(x, mean, color=color, linewidth=1.2, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if xlim is not None:
            ax.set_xlim(*xlim)
        if title:
            ax.set_title(title)
        if len(series) > 1 or series[0][0]:
            ax.legend(frameon=False)
        _save(fig, path)


def matrix_heatmap(path, matrix: np.ndarray, labels: Sequence[str], title: str = "") -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.6), layout="constrained")
        im = ax.imshow(matrix, cmap="viridis", interpolation="nearest")
        ticks = np.arange(len(labels))
        ax.set_xticks(ticks, labels, rotation=90)
        ax.set_yticks(ticks, labels)
        fig.colorbar(im, ax=ax, shrink=0.8)
        if title:
            ax.set_title(title)
        _save(fig, path)


def accuracy_bars(path, kinds: Sequence[str], means: Sequence[float], ci: Sequence[float],
                  chance: float | None = None) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(layout="constrained")
        pos = np.arange(len(kinds))
        ax.bar(pos, np.asarray(means) * 100, yerr=np.asarray(ci) * 100,
               color=[PALETTE[i % len(PALETTE)] for i in range(len(kinds))], capsize=3)
        ax.set_xticks(pos, kinds)
        ax.set_ylabel("balanced accuracy (%)")
        if chance is not None:
            ax.axhline(chance * 100, color="0.4", linestyle="--", linewidth=0.8)
        _save(fig, path)
