"""Figure rendering for check reports and simulation output.

Figures are written to files next to the delimited output (never shown
interactively); the Agg backend keeps this usable in batch runs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_report", "plot_flow_series", "plot_pair_study"]


def plot_report(report, path):
    """Horizontal residual bars per check against the tolerance line."""
    records = [r for r in report.records if r.max_residual is not None]
    fig, ax = plt.subplots(figsize=(7.0, 0.45 * max(4, len(records))))
    floor = 1e-18
    names = [r.id for r in records]
    values = [max(float(r.max_residual), floor) for r in records]
    colors = ["tab:green" if r.verdict == "PASS" else "tab:red" for r in records]
    y = np.arange(len(records))
    ax.barh(y, values, color=colors, log=True)
    for r, yi in zip(records, y):
        if r.tolerance:
            ax.plot([r.tolerance, r.tolerance], [yi - 0.4, yi + 0.4], "k--", lw=0.8)
    ax.set_yticks(y)
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("max residual (dashed: tolerance)")
    ax.set_title(f"{report.manifest_name or 'manifest'}: {report.overall}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_flow_series(times, integrals, drift, path, exact_err=None):
    """Conserved integrals and their drift over the simulated window."""
    fig, axes = plt.subplots(2, 1, figsize=(7.0, 6.0), sharex=True)
    for m in range(integrals.shape[1]):
        axes[0].plot(times, integrals[:, m], label=f"integral A{m + 1}")
    axes[0].set_ylabel("contour integral")
    axes[0].legend(loc="best", fontsize=8)
    for m in range(integrals.shape[1]):
        d = np.abs(integrals[:, m] - integrals[0, m]) / (1.0 + np.abs(integrals[0, m]))
        axes[1].semilogy(times, np.maximum(d, 1e-18), label=f"drift A{m + 1}")
    if exact_err is not None:
        axes[1].semilogy(times, np.maximum(exact_err, 1e-18), "k:", label="exact-solution error")
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("relative drift")
    axes[1].legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_pair_study(dts, discrepancies, path):
    """Log-log flow-commutation discrepancy with order guides."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.loglog(dts, discrepancies, "o-", label="discrepancy")
    d0 = max(discrepancies[0], 1e-18)
    for order, style in ((2, ":"), (3, "--")):
        guide = d0 * (np.asarray(dts) / dts[0]) ** order
        ax.loglog(dts, guide, style, color="gray", label=f"slope {order}")
    ax.set_xlabel("dt")
    ax.set_ylabel("L2 discrepancy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
