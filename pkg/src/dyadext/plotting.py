"""PNG renderings of command outputs.

These are conveniences for looking at results; the CSV files written next to
them remain the record.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_sequence(seq, path, title=None, lower_bound=None):
    """Deviation terms and their running Cesaro means against ``n``."""
    n = [t[0] for t in seq.terms]
    dev = [float(np.sqrt(float(t[1]))) for t in seq.terms]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(n, dev, ".", ms=4, label="deviation")
    ax.plot(n, seq.cesaro, "-", lw=1.5, label="Cesaro mean")
    if lower_bound is not None:
        ax.axhline(float(lower_bound), color="k", ls="--", lw=1, label="lower bound")
    ax.set_xlabel("n")
    ax.set_ylim(bottom=0)
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_permutation(p, path, title=None):
    """Each cell coloured by the column it is sent to."""
    g = p.geometry
    target = (np.asarray(p.image) % g.columns).reshape(g.rows, g.columns)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(target, origin="lower", cmap="viridis", interpolation="nearest")
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sample(rows, path):
    """Histograms of cycle count and period over a batch of samples."""
    fig, axes = plt.subplots(1, 2, figsize=(7, 3))
    for ax, key in zip(axes, ("cycles", "period")):
        ax.hist([int(r[key]) for r in rows], bins=20)
        ax.set_xlabel(key)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
