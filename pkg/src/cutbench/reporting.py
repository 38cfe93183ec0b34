"""Figure rendering for the report paths.

Renders the comparison and fit reports as PNG files next to their CSV/JSON
outputs.  Kept separate from the analysis module so the numeric layer stays
free of plotting state.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import CompareReport, ScalingFit

_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def render_compare_figure(report: CompareReport, path) -> None:
    """Median TTS vs n per solver with IQR bands, fits, and extrapolation."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for idx, series in enumerate(report.series):
        color = _COLORS[idx % len(_COLORS)]
        ns = np.array(series.ns, dtype=float)
        med = np.array(series.medians, dtype=float)
        q25 = np.array(series.q25, dtype=float)
        q75 = np.array(series.q75, dtype=float)
        finite = np.isfinite(med)
        ax.plot(ns[finite], med[finite], "o-", color=color, label=series.solver, ms=4)
        band = finite & np.isfinite(q25) & np.isfinite(q75)
        if band.any():
            ax.fill_between(ns[band], q25[band], q75[band], color=color, alpha=0.2, lw=0)
        fit = report.fits.get(series.solver)
        if fit is not None and finite.any():
            grid = np.linspace(ns[finite].min(), ns[finite].max(), 200)
            ax.plot(grid, fit.predict(grid), "--", color=color, lw=1, alpha=0.8)
        extrap = report.extrapolation.get(series.solver)
        if extrap:
            ax.plot(extrap[0], extrap[1], ":", color=color, lw=1, alpha=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("problem size n")
    ax.set_ylabel(report.value_field)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_fit_figure(ns, values, fit: ScalingFit | None, path, ylabel: str = "TTS") -> None:
    """Scatter of the fitted medians with the regression curve."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    ax.plot(ns[finite], values[finite], "o", color=_COLORS[0], label="median")
    if fit is not None and finite.any():
        grid = np.linspace(ns[finite].min(), ns[finite].max(), 200)
        label = fit.family
        if "B" in fit.params:
            label += f" (B={fit.params['B']:.3g})"
        ax.plot(grid, fit.predict(grid), "--", color=_COLORS[1], label=label)
    if finite.any() and np.all(values[finite] > 0):
        ax.set_yscale("log")
    ax.set_xlabel("problem size n")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_trajectory_figure(trajectory: dict, path) -> None:
    """Single-trial machine dynamics: energy, means, feedback amplitudes."""
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 7.5), sharex=True)
    t = trajectory["t"]
    axes[0].plot(t, trajectory["energy"], color=_COLORS[0], lw=0.8)
    axes[0].set_ylabel("inferred energy")
    axes[1].plot(t, trajectory["mu"], lw=0.6)
    axes[1].set_ylabel("mean amplitudes")
    axes[2].plot(t, trajectory["e"], lw=0.6)
    axes[2].set_ylabel("feedback amplitudes")
    axes[2].set_xlabel("normalized time")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
