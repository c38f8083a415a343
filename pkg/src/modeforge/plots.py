"""Matplotlib renderings of the report outputs (saved to files)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .demand import DemandSummary, DistributionReport
from .trips import MODES

MODE_COLORS = {"Car": "#3465a4", "Metro": "#4e9a06", "Bus": "#cc0000",
               "Walk": "#edd400"}


def plot_mode_shares(summary: DemandSummary, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    shares = [summary.shares[m] * 100.0 for m in MODES]
    ax.bar(MODES, shares, color=[MODE_COLORS[m] for m in MODES])
    for i, s in enumerate(shares):
        ax.text(i, s, f"{s:.1f}%", ha="center", va="bottom", fontsize=9)
    ax.set_ylabel("share of trips [%]")
    ax.set_title(f"Mode shares ({summary.total} trips)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_distributions(report: DistributionReport, path: str | Path) -> None:
    """2x2 grid of per-mode histograms, reference overlaid when present."""
    edges = report.bin_edges
    centers = (edges[:-1] + edges[1:]) / 2.0
    widths = np.diff(edges)
    unit = "s" if report.metric == "trip_time" else "m"
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    for ax, mode in zip(axes.flat, MODES):
        ax.bar(centers, report.proportions[mode], width=widths * 0.9,
               color=MODE_COLORS[mode], label="observed")
        if report.reference is not None:
            ax.step(edges, np.append(report.reference[mode],
                                     report.reference[mode][-1]),
                    where="post", color="black", lw=1.2, label="reference")
            ax.legend(fontsize=8)
        ax.set_title(mode, fontsize=10)
        ax.set_xlabel(f"{report.metric} [{unit}]", fontsize=8)
        ax.set_ylabel("proportion", fontsize=8)
    fig.suptitle(f"{report.metric} distribution by mode")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
