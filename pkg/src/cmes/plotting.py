"""Figures: average rank per iteration, and y* histograms from a bias study."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_rank_curves(per_iteration: dict, path, title: str = "average rank (lower is better)"):
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, curve in sorted(per_iteration.items()):
        ax.plot(np.arange(1, len(curve) + 1), curve, label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("average rank")
    ax.set_title(title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ystar_histograms(report: dict, path):
    """One panel per sampler; one step histogram per discretization size."""
    edges = np.asarray(report["bin_edges"])
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, name in zip(axes, ("joint", "marginal")):
        for m, summ in report[name].items():
            ax.stairs(summ["hist_counts"], edges, label=f"m = {m}")
        ax.set_title(f"{name} sampler")
        ax.set_xlabel("y*")
        ax.legend(fontsize="small")
    axes[0].set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
