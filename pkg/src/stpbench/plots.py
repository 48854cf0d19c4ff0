"""Report figures: gradient decay, timing, and rate curves.

Renders one line per trajectory with matplotlib and writes whatever
format the output extension names (the CLI default is SVG, which keeps
figures alongside the CSVs as plain text).  Merged reports draw one
color per algorithm with a legend.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import EmptyPlotError
from .experiment import load_trajectories
from .solvers import Trajectory

PLOT_KINDS = ("grad_vs_iter", "grad_vs_time", "rate_curve", "fgap_vs_iter")

_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple")


def _series(traj: Trajectory, kind: str, exponent: float):
    if kind == "grad_vs_iter":
        return traj.t, traj.grad_norm
    if kind == "grad_vs_time":
        return traj.elapsed_ns / 1e9, traj.grad_norm
    if kind == "rate_curve":
        return traj.t, traj.t.astype(float) ** exponent * traj.min_grad_norm
    if kind == "fgap_vs_iter":
        f_star = traj.meta.get("f_star")
        if f_star is None:
            raise EmptyPlotError("fgap_vs_iter needs an objective with known optimum")
        return traj.t, traj.f_gap(f_star)
    raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")


_LABELS = {
    "grad_vs_iter": ("iteration", "gradient norm"),
    "grad_vs_time": ("elapsed seconds", "gradient norm"),
    "rate_curve": ("iteration", "scaled best gradient norm"),
    "fgap_vs_iter": ("iteration", "objective gap"),
}


def plot_trajectories(groups: list[tuple[str, list[Trajectory]]], kind: str,
                      out_path: str | Path, exponent: float = 0.49) -> Path:
    """Draw one line per trajectory; one color and legend entry per group."""
    if not groups or all(not trajs for _, trajs in groups):
        raise EmptyPlotError("no trajectories to plot")
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ys = []
    for gi, (label, trajs) in enumerate(groups):
        color = _COLORS[gi % len(_COLORS)]
        for ti, traj in enumerate(trajs):
            x, y = _series(traj, kind, exponent)
            ax.plot(x, y, color=color, linewidth=0.8, alpha=0.7,
                    label=label if ti == 0 and len(groups) > 1 else None)
            ys.append(np.asarray(y, dtype=float))

    xlabel, ylabel = _LABELS[kind]
    if kind in ("grad_vs_iter", "grad_vs_time", "fgap_vs_iter"):
        ax.set_yscale("log", base=10)
        ylabel += " (log10 scale)"
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)

    flat = np.concatenate(ys)
    mask = np.isfinite(flat)
    if ax.get_yscale() == "log":
        mask &= flat > 0
    finite = flat[mask]
    if finite.size and finite.max() == finite.min():
        c = float(finite[0])  # flat series: pad the y-range by 5%
        ax.set_ylim(c * 0.95, c * 1.05)
    if len(groups) > 1:
        ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def plot_report(report: dict, base_dir: str | Path, kind: str,
                out_path: str | Path, exponent: float = 0.49) -> Path:
    """Render a stored run (or a merged set of runs) to a figure file."""
    if report.get("merged"):
        groups = [(run["label"], load_trajectories(run["report"], run["base_dir"]))
                  for run in report["runs"]]
    else:
        label = report["config"]["solver"]["name"]
        groups = [(label, load_trajectories(report, base_dir))]
    return plot_trajectories(groups, kind, out_path, exponent)
