"""Deterministic SVG plots (no timestamps, fixed element ids)."""
from __future__ import annotations

import numpy as np

from .errors import ArgumentError


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "slowdiff"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def emit_plot(series, path, *, loglog: bool = True, title: str = "", xlabel: str = "",
              ylabel: str = "", fit: bool = True) -> dict:
    """Write ``series`` (``{label: (x, y)}``) to a standalone SVG.

    With ``loglog`` and ``fit`` each series gets a least-squares line in log-log
    coordinates whose slope appears in the legend. Returns ``{label: slope}``.
    """
    if not series:
        raise ArgumentError("nothing to plot")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    slopes = {}
    try:
        for label, (x, y) in series.items():
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            if x.size == 0 or x.shape != y.shape:
                raise ArgumentError(f"series {label!r} is empty or ragged")
            name = str(label)
            if loglog and fit and x.size >= 2 and np.all(x > 0) and np.all(y > 0):
                slope, icpt = np.polyfit(np.log(x), np.log(y), 1)
                slopes[label] = float(slope)
                name = f"{label} (slope {slope:.6f})"
                xs = np.geomspace(x.min(), x.max(), 64)
                ax.plot(xs, np.exp(icpt) * xs**slope, "--", lw=0.8, color="gray")
            ax.plot(x, y, "o-", ms=4, label=name)
        if loglog:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return slopes
