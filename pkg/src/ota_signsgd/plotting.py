"""Matplotlib figures rendered next to the CSV artifacts."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "figure.dpi": 120,
}


def _save(fig, path, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    description = ", ".join(f"{k}={v}" for k, v in meta.items())
    fig.savefig(path, metadata={"Description": description, "Software": None})
    plt.close(fig)
    return path


def plot_curves(panels, path, meta: dict) -> Path:
    """``panels`` maps a panel title to a list of (label, y, f(y)) series."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.2), squeeze=False)
        for ax, (title, series) in zip(axes[0], panels.items()):
            for label, y, f in series:
                ax.plot(y, f, label=label, lw=1.2)
            bound = np.sqrt(2 / np.pi)
            ax.axhline(bound, color="0.5", ls=":", lw=0.8)
            ax.axhline(-bound, color="0.5", ls=":", lw=0.8)
            ax.set_title(title)
            ax.set_xlabel("received signal y")
            ax.set_ylabel("estimate f(y)")
            ax.legend(loc="upper left")
        fig.tight_layout()
        return _save(fig, path, meta)


def plot_training(history, path, meta: dict) -> Path:
    rounds = [m.round for m in history]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.2))
        ax1.plot(rounds, [m.loss for m in history], lw=1.2)
        ax1.set_xlabel("round")
        ax1.set_ylabel("training loss")
        ax2.semilogy(rounds, [max(m.agg_mse, 1e-300) for m in history], lw=0.8, label="aggregation error")
        ax2.semilogy(rounds, [max(m.grad_norm_sq, 1e-300) for m in history], lw=1.2, label="squared gradient norm")
        ax2.set_xlabel("round")
        ax2.legend()
        fig.tight_layout()
        return _save(fig, path, meta)


def plot_convergence(horizons, bounds, path, meta: dict) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        ax.loglog(horizons, bounds, marker="o", lw=1.2)
        ax.set_xlabel("rounds T")
        ax.set_ylabel("gradient-norm bound")
        fig.tight_layout()
        return _save(fig, path, meta)
