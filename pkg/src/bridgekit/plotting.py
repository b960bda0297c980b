"""Figures for CLI reports, rendered straight to files (no pyplot state)."""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

DPI = 120


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=DPI, bbox_inches="tight", metadata={"Software": None} if path.suffix == ".png" else None)
    return path


def flow_heatmap(flow, path, labels=None, title: str | None = None) -> Path:
    """Time-by-node marginal flow as an annotated heat map."""
    flow = np.asarray(flow, dtype=float)
    T1, n = flow.shape
    fig = Figure(figsize=(0.6 * n + 1.5, 0.45 * T1 + 1.2))
    ax = fig.add_subplot()
    im = ax.imshow(flow, cmap="Blues", vmin=0.0, vmax=1.0, aspect="auto")
    for t in range(T1):
        for i in range(n):
            v = flow[t, i]
            if v > 5e-5:
                ax.text(i, t, f"{v:.3f}".rstrip("0").rstrip(".") if v < 0.9995 else "1",
                        ha="center", va="center", fontsize=7, color="white" if v > 0.6 else "black")
    ax.set_xticks(range(n), labels or [str(i + 1) for i in range(n)])
    ax.set_yticks(range(T1), [str(t) for t in range(T1)])
    ax.set_xlabel("node")
    ax.set_ylabel("time step")
    if title:
        ax.set_title(title, fontsize=9)
    fig.colorbar(im, ax=ax, fraction=0.04)
    return _save(fig, path)


def sweep_plot(temperatures, tables, path) -> Path:
    """Path masses against temperature, one line per path (log-scale T)."""
    temps = np.asarray(temperatures, dtype=float)
    names = sorted({p for tab in tables for p in tab})
    fig = Figure(figsize=(5.5, 3.5))
    ax = fig.add_subplot()
    for name in names:
        ax.plot(temps, [tab.get(name, 0.0) for tab in tables], marker="o", ms=3, label=name)
    ax.set_xscale("log")
    ax.set_xlabel("temperature T")
    ax.set_ylabel("path mass")
    ax.legend(fontsize=6, loc="best")
    return _save(fig, path)


def cost_curve_plot(epsilons, costs, path, reference: float | None = None) -> Path:
    fig = Figure(figsize=(4.5, 3.2))
    ax = fig.add_subplot()
    ax.plot(epsilons, costs, marker="o", label="entropic plan cost")
    if reference is not None:
        ax.axhline(reference, color="k", ls="--", lw=0.8, label="monotone rearrangement")
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("epsilon")
    ax.set_ylabel(r"$\sum c\,\pi$")
    ax.legend(fontsize=7)
    return _save(fig, path)


def interpolation_plot(x, times, densities, path) -> Path:
    fig = Figure(figsize=(5.5, 3.2))
    ax = fig.add_subplot()
    cmap = matplotlib.colormaps["viridis"]
    for k, (t, rho) in enumerate(zip(times, densities)):
        ax.plot(x, rho, color=cmap(k / max(1, len(times) - 1)), lw=1.0, label=f"t={t:g}")
    ax.set_xlabel("x")
    ax.set_ylabel(r"$\rho(t, x)$")
    ax.legend(fontsize=6, ncol=2)
    return _save(fig, path)


__all__ = ["cost_curve_plot", "flow_heatmap", "interpolation_plot", "sweep_plot"]
