"""Matplotlib figures written next to the trace and benchmark outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def figsize(scale=1.0, ratio=None):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    width = 6.4 * scale
    return width, width * (golden if ratio is None else ratio)


def plot_contribution_trace(trace, path, relevant=None, title=None):
    """One line per feature: estimated contribution at each iteration it survived.

    Relevant features (when known) are drawn in red, everything else in grey.
    """
    relevant = set(relevant or ())
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize())
        for j in range(trace.n_features):
            its, vals = [], []
            for r in trace.iterations:
                if j in r.active_ids:
                    its.append(r.iteration)
                    vals.append(r.contributions[r.active_ids.index(j)])
            if not its:
                continue
            if j in relevant:
                ax.plot(its, vals, color="tab:red", lw=1.4, zorder=3)
            else:
                ax.plot(its, vals, color="0.6", lw=0.6, alpha=0.6, zorder=2)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_xlabel("iteration")
        ax.set_ylabel("expected contribution")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_report(report, path):
    """Accuracy and selected-feature count per (dataset, algorithm) cell."""
    cells = [c for c in report.cells if c.error is None]
    datasets = list(dict.fromkeys(c.dataset for c in cells))
    algorithms = list(dict.fromkeys(c.algorithm for c in cells))
    width = 0.8 / max(len(algorithms), 1)
    x = np.arange(len(datasets))
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 2, figsize=figsize(1.5, 0.4))
        for k, alg in enumerate(algorithms):
            acc, acc_sd, feat, feat_sd = [], [], [], []
            for d in datasets:
                c = next((c for c in cells if c.dataset == d and c.algorithm == alg), None)
                acc.append(np.nan if c is None else c.accuracy[0])
                acc_sd.append(0.0 if c is None else c.accuracy[1])
                feat.append(np.nan if c is None else c.features[0])
                feat_sd.append(0.0 if c is None else c.features[1])
            pos = x + (k - (len(algorithms) - 1) / 2) * width
            axes[0].bar(pos, acc, width, yerr=acc_sd, label=alg, capsize=2)
            axes[1].bar(pos, feat, width, yerr=feat_sd, label=alg, capsize=2)
        for ax, label in zip(axes, ("accuracy (%)", "selected features")):
            ax.set_xticks(x)
            ax.set_xticklabels(datasets)
            ax.set_ylabel(label)
        axes[0].set_ylim(0, 100)
        axes[0].legend(frameon=False, ncol=len(algorithms), loc="lower left", bbox_to_anchor=(0.0, 1.0))
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
