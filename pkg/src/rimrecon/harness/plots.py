"""Matplotlib report figures rendered next to the delimited outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_grayscale_png(image, path):
    """8-bit grayscale dump of a magnitude image."""
    from PIL import Image

    arr = np.abs(np.asarray(image))
    peak = arr.max()
    if peak > 0:
        arr = arr / peak
    Image.fromarray((arr * 255).astype(np.uint8), mode="L").save(path)


def plot_loss_curve(curve, path):
    epochs = [row[0] for row in curve]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(epochs, [row[1] for row in curve], label="train")
    if not any(np.isnan(row[2]) for row in curve):
        ax.semilogy(epochs, [row[2] for row in curve], label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_timing(rows, path, x_key, fixed_desc):
    """Timing curves per method; ``rows`` are dicts from the benchmark CSV."""
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = sorted({r["method"] for r in rows})
    for method in methods:
        pts = sorted((float(r[x_key]), float(r["mean_s"])) for r in rows if r["method"] == method)
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=method)
    ax.set_xlabel(x_key)
    ax.set_ylabel("mean single-slice time (s)")
    ax.set_title(fixed_desc)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_metric_boxes(groups, path, metric_name):
    """Box plot over named groups of metric values."""
    names = list(groups)
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(names)), 4))
    ax.boxplot([groups[n] for n in names], tick_labels=names)
    ax.set_ylabel(metric_name)
    ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_lesion_bias(rows, path):
    """Measured vs simulated lesion intensity per method and acceleration."""
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted({(r["method"], float(r["acceleration"])) for r in rows})
    for method, accel in keys:
        pts = sorted(
            (float(r["factor"]), float(r["measured_mean"]), float(r["measured_std"]))
            for r in rows
            if r["method"] == method and float(r["acceleration"]) == accel
        )
        ax.errorbar(
            [p[0] for p in pts], [p[1] for p in pts], yerr=[p[2] for p in pts],
            marker="o", capsize=2, label=f"{method} {accel:g}x",
        )
    sim = sorted({float(r["factor"]) for r in rows})
    ref = {float(r["factor"]): float(r["simulated"]) for r in rows}
    ax.plot(sim, [ref[f] for f in sim], "k-", label="simulated")
    ax.set_xlabel("lesion intensity factor")
    ax.set_ylabel("measured intensity")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
