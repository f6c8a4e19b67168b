"""Figure rendering for the report path.

Renders ROC curves, ISI histograms and power surfaces to image files next
to the delimited/JSON outputs, for quick inspection of evaluation runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_roc(curves: dict, path) -> Path:
    """One ROC panel; ``curves`` maps label -> RocCurve."""
    fig, ax = plt.subplots(figsize=(5, 4.5))
    for label, curve in curves.items():
        xs = [0.0] + [p[0] for p in curve.points] + [1.0]
        ys = [0.0] + [p[1] for p in curve.points] + [1.0]
        ax.plot(xs, ys, marker="o", ms=3, label=f"{label} (AUROC {curve.auroc:.3f})")
    ax.plot([0, 1], [0, 1], ls=":", c="gray", lw=0.8)
    ax.set_xlabel("FP rate")
    ax.set_ylabel("TP rate")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_isi_histogram(fit, path) -> Path:
    """Linear and log-log panels of the ISI distribution with the tail fit."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax1.bar(fit.bin_centers, fit.density,
            width=np.gradient(fit.bin_centers), align="center")
    ax1.set_xlabel("ISI")
    ax1.set_ylabel("density")
    used = (fit.bin_centers >= fit.tail_start) & (fit.counts > 0)
    ax2.loglog(fit.bin_centers[fit.counts > 0], fit.density[fit.counts > 0],
               "o", ms=3)
    x = fit.bin_centers[used]
    scale = fit.density[used][0] / x[0] ** fit.raw_slope
    ax2.loglog(x, scale * x**fit.raw_slope, "-",
               label=f"q = {fit.slope_q:.2f} (r$^2$ = {fit.r_squared:.2f})")
    ax2.set_xlabel("ISI")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_power_surface(surface, path) -> Path:
    """Heatmap of detection power over the (SNR weight, delta) grid."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    im = ax.pcolormesh(surface.deltas, surface.snr_weights, surface.power,
                       vmin=0, vmax=1, shading="nearest")
    fig.colorbar(im, ax=ax, label="power")
    ax.set_xlabel("shift magnitude (rad)")
    ax.set_ylabel("signal weight r")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
