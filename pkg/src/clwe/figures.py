"""Matplotlib figures rendered next to the delimited reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple")


def save_pca_figure(rows, path, title: str = "") -> None:
    """Scatter of 2-D projected embeddings, one color per language label."""
    labels = []
    for _, label, _ in rows:
        if label not in labels:
            labels.append(label)
    fig, ax = plt.subplots(figsize=(6, 5))
    for i, label in enumerate(labels):
        xs = [c[0] for _, lab, c in rows if lab == label]
        ys = [c[1] for _, lab, c in rows if lab == label]
        ax.scatter(xs, ys, s=6, alpha=0.6, label=label, color=_COLORS[i % len(_COLORS)])
    ax.set_xlabel("PC 1")
    ax.set_ylabel("PC 2")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trace_figure(sizes, mean_scores, path) -> None:
    """Refinement progress: induced dictionary size and mean pair score."""
    iterations = range(1, len(sizes) + 1)
    fig, ax1 = plt.subplots(figsize=(6, 4))
    ax1.plot(iterations, mean_scores, "o-", color="tab:blue")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("mean induced score", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(iterations, sizes, "s--", color="tab:orange")
    ax2.set_ylabel("dictionary size", color="tab:orange")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_gamma_sweep_figure(gammas, class_counts, path) -> None:
    """Vocabulary class sizes as a function of the reallocation threshold."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, key in enumerate(("shared", "l1", "l2")):
        ax.plot(gammas, [c[key] for c in class_counts], "o-",
                label=key, color=_COLORS[i % len(_COLORS)])
    ax.set_xlabel("gamma")
    ax.set_ylabel("tokens")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
