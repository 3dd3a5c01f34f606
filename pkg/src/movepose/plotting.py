"""Figures written next to the CSV/JSON reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _figure(width=4.5, ratio=0.62):
    return plt.subplots(figsize=(width, width * ratio))


def plot_kernel_sweep(rows, path):
    """GFLOPs and receptive field against refinement kernel size."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ks = [r["kernel"] for r in rows]
        ax.plot(ks, [r["gflops"] for r in rows], "o-", color="C0")
        ax.set_xlabel("kernel size")
        ax.set_ylabel("GFLOPs", color="C0")
        ax.set_xticks(ks)
        ax2 = ax.twinx()
        ax2.plot(ks, [r["receptive_field"] for r in rows], "s--", color="C1")
        ax2.set_ylabel("receptive field (px)", color="C1")
        ax2.spines["right"].set_visible(True)
        fig.savefig(path)
        plt.close(fig)


def plot_layer_flops(report, path, top=20):
    with plt.rc_context(STYLE):
        layers = sorted(report.layers, key=lambda l: -l.flops)[:top][::-1]
        fig, ax = _figure(5.0, 0.9)
        ax.barh([l.id for l in layers], [l.flops / 1e6 for l in layers], color="C0")
        ax.set_xlabel("MFLOPs")
        ax.set_title(f"{report.model}: {report.gflops:.3f} GFLOPs total", fontsize=9)
        fig.savefig(path)
        plt.close(fig)


def plot_latency(report, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        s = np.asarray(report.samples_ms)
        ax.hist(s, bins=min(30, max(5, len(s) // 3)), color="C0", alpha=0.8)
        for value, style, label in ((report.median_ms, "-", "median"), (report.p95_ms, "--", "p95")):
            ax.axvline(value, color="k", linestyle=style, linewidth=1, label=f"{label} {value:.1f} ms")
        ax.set_xlabel("latency (ms)")
        ax.set_ylabel("iterations")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)


def plot_pr_curves(report, path):
    from .evaluator.coco import RECALL_POINTS, THRESHOLDS

    with plt.rc_context(STYLE):
        fig, ax = _figure()
        if report.precision is not None:
            cmap = plt.get_cmap("viridis")
            for i, t in enumerate(THRESHOLDS):
                ax.plot(RECALL_POINTS, report.precision[i], color=cmap(i / (len(THRESHOLDS) - 1)),
                        label=f"OKS {t:.2f}" if i in (0, 5, 9) else None)
            ax.legend()
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        fig.savefig(path)
        plt.close(fig)
