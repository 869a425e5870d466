"""SVG heatmaps of connectivity and p-value matrices.

Colour ranges are fixed per metric so figures from different subjects,
conditions and runs are directly comparable.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from .core import Metric  # noqa: E402

COLOR_RANGES = {
    Metric.PCC: (-0.5, 1.0),
    Metric.PLV: (0.2, 0.8),
    Metric.MSC: (0.2, 0.8),
    Metric.DDTF: (0.02, 0.06),
    Metric.GPDC: (0.1, 0.6),
}

SIGNIFICANT = "#1a1a1a"
NOT_SIGNIFICANT = "#f2f2f2"

# Reproducible SVG bytes: fixed element ids, no creation date.
_RC = {"svg.hashsalt": "neuroflux", "svg.fonttype": "none"}


def _axes(ax, labels, title):
    n = len(labels)
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_yticklabels(labels, fontsize=6)
    ax.set_xlabel("source")
    ax.set_ylabel("sink")
    ax.set_title(title, fontsize=9)


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def matrix_figure(values, metric, labels, title, path):
    """Heatmap of a connectivity matrix with the metric's fixed colour range."""
    metric = Metric(metric)
    vmin, vmax = COLOR_RANGES[metric]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 5.2))
        im = ax.imshow(np.asarray(values), vmin=vmin, vmax=vmax, cmap="jet",
                       interpolation="none")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        _axes(ax, labels, title)
        fig.tight_layout()
        return _save(fig, path)


def pvalue_figure(p, labels, title, path, alpha=0.05):
    """Cells with ``p < alpha`` drawn dark, the rest light."""
    mask = (np.asarray(p) < alpha).astype(float)
    cmap = ListedColormap([NOT_SIGNIFICANT, SIGNIFICANT])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.4, 5.2))
        ax.imshow(mask, vmin=0, vmax=1, cmap=cmap, interpolation="none")
        _axes(ax, labels, f"{title} (dark: p < {alpha:g})")
        fig.tight_layout()
        return _save(fig, path)
