"""Matplotlib figures written as deterministic SVG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden = (np.sqrt(5.0) - 1.0) / 2.0
fig_width = 5.0

STYLE = {
    "figure.figsize": (fig_width, fig_width * golden),
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "vpsheath",
    "svg.fonttype": "none",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def line_plot(path, x, curves: dict, xlabel="x", ylabel="", title=None) -> Path:
    """One line per entry of ``curves`` (label -> values)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, values in curves.items():
            ax.plot(x, values, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(curves) > 1:
            ax.legend()
        return _save(fig, path)


def heatmap(path, x, xi, values, title=None, label="f") -> Path:
    """Phase-space plot of values[x, xi] with x horizontal and xi vertical."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        mesh = ax.pcolormesh(x, xi, np.asarray(values).T, shading="auto", cmap="viridis",
                             rasterized=False)
        fig.colorbar(mesh, ax=ax, label=label)
        ax.set_xlabel("x")
        ax.set_ylabel(r"$\xi$")
        ax.grid(False)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def loglog_plot(path, eps, series: dict, slopes: dict | None = None, title=None) -> Path:
    """Error norms against epsilon on log-log axes, with fitted slopes in the legend."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, values in series.items():
            label = name
            if slopes and slopes.get(name) is not None:
                label = f"{name} (slope {slopes[name].slope:.3f})"
            ax.loglog(eps, values, "o-", label=label)
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_ylabel("error")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)
