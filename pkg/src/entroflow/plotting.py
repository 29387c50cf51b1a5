"""Static figures for CLI runs (matplotlib, non-interactive backend)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_space", "plot_series", "plot_margins", "plot_minimizer", "plot_flow"]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_space(space, curvature, out_dir) -> str:
    """Weight and Bakry-Emery curvature profile."""
    fig, (a0, a1) = plt.subplots(1, 2, figsize=(9, 3.5))
    a0.plot(space.nodes, space.weight)
    a0.set_xlabel("x")
    a0.set_ylabel("m(x)")
    a0.set_title(f"{space.preset}: weight")
    k = np.where(np.isfinite(curvature), curvature, np.nan)
    a1.plot(space.nodes, k)
    a1.set_xlabel("x")
    a1.set_ylabel("k_eff")
    a1.set_title("effective curvature")
    return _save(fig, os.path.join(out_dir, "space.png"))


def plot_flow(flow, out_dir, max_curves: int = 8) -> str:
    """Density snapshots at a subset of the stored times."""
    fig, ax = plt.subplots(figsize=(6, 4))
    idx = np.unique(np.linspace(0, len(flow) - 1, min(max_curves, len(flow))).astype(int))
    for k in idx:
        rho = flow.densities[k]
        if flow.space is None:
            r = np.linspace(0, 8 * np.sqrt(rho.N * rho.t), 200)
            ax.plot(r, rho.u(r), label=f"t={flow.times[k]:.3g}")
        else:
            ax.plot(flow.space.nodes, rho.values, label=f"t={flow.times[k]:.3g}")
    ax.set_xlabel("x")
    ax.set_ylabel("u(t, x)")
    ax.legend(fontsize=7)
    return _save(fig, os.path.join(out_dir, "flow.png"))


def plot_series(series, out_dir) -> str:
    """H, I, entropy power and W_N against t."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    panels = (("H", series.H), ("I", series.I), ("entropy power", series.entropy_power),
              ("W_N", series.W_N))
    for ax, (label, y) in zip(axes.ravel(), panels):
        ax.plot(series.t, y, marker=".", lw=1)
        ax.set_xscale("log")
        ax.set_ylabel(label)
    for ax in axes[1]:
        ax.set_xlabel("t")
    return _save(fig, os.path.join(out_dir, "functionals.png"))


def plot_margins(results, out_dir) -> str:
    """Per-time margins of every check that stores a time series."""
    fig, ax = plt.subplots(figsize=(7, 4))
    drawn = 0
    for res in results:
        t = res.details.get("t")
        m = res.details.get("margin")
        if t is None or m is None:
            continue
        ev = np.asarray(res.details.get("evaluated", np.ones(len(t), dtype=bool)))
        m = np.asarray(m, float)
        ax.plot(np.asarray(t)[ev], m[ev], marker=".", lw=1, label=res.name)
        drawn += 1
    ax.axhline(0.0, color="k", lw=0.8)
    if drawn:
        ax.set_xscale("log")
        ax.legend(fontsize=7)
    ax.set_yscale("symlog", linthresh=1e-6)
    ax.set_xlabel("t")
    ax.set_ylabel("margin")
    return _save(fig, os.path.join(out_dir, "margins.png"))


def plot_minimizer(result, out_dir) -> str:
    """Optimizer history and the minimizing density."""
    fig, (a0, a1) = plt.subplots(1, 2, figsize=(9, 3.5))
    h = np.asarray(result.history)
    a0.plot(np.arange(h.size), h - h[-1] + 1e-16)
    a0.set_yscale("log")
    a0.set_xlabel("iteration")
    a0.set_ylabel("W - W_final")
    sp = result.minimizer.space
    a1.plot(sp.nodes, result.minimizer.values)
    a1.set_xlabel("x")
    a1.set_ylabel("minimizer")
    return _save(fig, os.path.join(out_dir, "minimizer.png"))
