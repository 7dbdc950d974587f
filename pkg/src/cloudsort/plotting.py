"""Report figures written next to the CSV / key=value outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .descriptor import LAYOUT  # noqa: E402
from .evaluation import all_metrics  # noqa: E402

# no timestamps or version strings, so reruns give identical bytes
_META = {"Software": None}

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path):
    fig.savefig(path, metadata=_META, bbox_inches="tight")
    plt.close(fig)
    return path


def confusion_figure(cm, path, title="Confusion matrix (row-normalized)"):
    counts = cm.counts.astype(float)
    rows = counts.sum(axis=1, keepdims=True)
    frac = np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)
    n = len(cm.classes)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(1.2 + 0.55 * n, 1.0 + 0.5 * n))
        im = ax.imshow(frac, cmap="Blues", vmin=0, vmax=1)
        ax.set_xticks(range(n), cm.classes, rotation=45, ha="right")
        ax.set_yticks(range(n), cm.classes)
        ax.set_xlabel("predicted")
        ax.set_ylabel("actual")
        ax.set_title(title)
        for i in range(n):
            for j in range(n):
                if counts[i, j]:
                    ax.text(j, i, f"{int(counts[i, j])}", ha="center", va="center",
                            color="white" if frac[i, j] > 0.5 else "black", fontsize=7)
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        return _save(fig, path)


def metrics_figure(cm, path, title="One-vs-all metrics"):
    metrics = all_metrics(cm)
    names = list(metrics)
    x = np.arange(len(names))
    width = 0.27
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(names) + 1.5), 3.0))
        for k, (field, color) in enumerate((("recall", "C0"), ("precision", "C1"), ("f1", "C2"))):
            vals = [getattr(metrics[c], field) for c in names]
            heights = [0.0 if v is None else v for v in vals]
            bars = ax.bar(x + (k - 1) * width, heights, width, label=field, color=color)
            for bar, v in zip(bars, vals):
                if v is None:
                    ax.text(bar.get_x() + bar.get_width() / 2, 0.02, "n/a",
                            rotation=90, ha="center", va="bottom", fontsize=6)
        ax.set_xticks(x, names, rotation=45, ha="right")
        ax.set_ylim(0, 1.05)
        ax.set_title(title)
        ax.legend(ncol=3, loc="lower right", frameon=False)
        return _save(fig, path)


def descriptor_figure(desc, path, title=None):
    spans = LAYOUT[desc.kind]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(7.0, 2.4))
        for k, (name, (lo, hi)) in enumerate(spans.items()):
            ax.bar(np.arange(lo, hi), desc.values[lo:hi], width=1.0, color=f"C{k}", label=name)
        ax.set_xlim(0, len(desc))
        ax.set_xlabel("bin")
        ax.set_title(title or f"{desc.kind} descriptor")
        ax.legend(ncol=4, frameon=False, loc="upper right")
        return _save(fig, path)


def scene_figure(scene, objects, rows, path):
    """Top-down view of the scene with each detected object and its assigned label."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 4.2))
        ax.scatter(scene.xyz[:, 0], scene.xyz[:, 1], s=0.3, c="0.8", rasterized=True)
        for k, (obj, row) in enumerate(zip(objects, rows)):
            ax.scatter(obj.xyz[:, 0], obj.xyz[:, 1], s=1.5, c=obj.rgb / 255.0, rasterized=True)
            cx, cy = row["centroid"][:2]
            ax.plot(cx, cy, "k+", ms=8)
            ax.annotate(f"{k}: {row['label']}\n-> {row['bin']}", (cx, cy),
                        xytext=(6, 6), textcoords="offset points", fontsize=7)
        ax.set_aspect("equal")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_title("sort simulation")
        return _save(fig, path)
