"""SVG figures: weekly harvest bars, window-sweep heat map, scenario fan.

Figures are written with a fixed hash salt and no date stamp so identical
inputs give byte-identical files.
"""
from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
from matplotlib import rcParams  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

rcParams["svg.hashsalt"] = "plantsched"
rcParams["svg.fonttype"] = "none"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def expected_weekly(profile, probabilities):
    """``(weeks, expected ears per week)`` over the profile's span."""
    p = np.asarray(probabilities, dtype=np.float64)
    weeks = np.arange(profile.first_week, profile.last_week + 1)
    return weeks, p @ profile.loads


def plot_weekly_harvest(path, profile, probabilities, capacity=None, baseline=None, title="Weekly harvest"):
    """Bar chart of expected weekly harvest; ``baseline`` adds the original schedule beside it."""
    fig = Figure(figsize=(9, 4))
    ax = fig.add_subplot()
    weeks, ev = expected_weekly(profile, probabilities)
    lo, hi = weeks[0], weeks[-1]
    if baseline is not None:
        bw, bv = expected_weekly(baseline, probabilities)
        lo, hi = min(lo, bw[0]), max(hi, bw[-1])
        ax.bar(bw - 0.2, bv, width=0.4, color="#bbbbbb", label="original")
        ax.bar(weeks + 0.2, ev, width=0.4, color="#2b6ca3", label="optimal")
    else:
        ax.bar(weeks, ev, width=0.8, color="#2b6ca3", label="scheduled")
    if capacity is not None:
        ax.axhline(capacity, color="#b22222", linestyle="--", linewidth=1, label=f"capacity {capacity}")
    ax.set_xlim(lo - 1, hi + 1)
    ax.set_xlabel("week")
    ax.set_ylabel("expected ears harvested")
    ax.set_title(title)
    ax.legend(loc="upper right", frameon=False)
    fig.tight_layout()
    _save(fig, path)


def plot_sweep_heatmap(path, result):
    """Pairwise objective per (first week, last week) cell; blank cells are infeasible."""
    firsts = sorted({c.first_week for c in result.grid})
    lasts = sorted({c.last_week for c in result.grid})
    grid = np.full((len(lasts), len(firsts)), np.nan)
    fi = {w: k for k, w in enumerate(firsts)}
    li = {w: k for k, w in enumerate(lasts)}
    for c in result.grid:
        if c.eq6_value is not None:
            grid[li[c.last_week], fi[c.first_week]] = c.eq6_value
    fig = Figure(figsize=(6, 5))
    ax = fig.add_subplot()
    im = ax.imshow(
        np.ma.masked_invalid(grid),
        origin="lower",
        aspect="auto",
        cmap="viridis",
        extent=(firsts[0] - 0.5, firsts[-1] + 0.5, lasts[0] - 0.5, lasts[-1] + 0.5),
    )
    ax.plot([result.best_window.first_week], [result.best_window.last_week], marker="*", color="white", markersize=12)
    fig.colorbar(im, ax=ax, label="pairwise objective")
    ax.set_xlabel("first harvest week")
    ax.set_ylabel("last harvest week")
    ax.set_title("Harvest window sweep")
    fig.tight_layout()
    _save(fig, path)


def plot_scenarios(path, scenario_set, history=None, tail_days=365):
    """Scenario trajectories after the last ``tail_days`` of history."""
    fig = Figure(figsize=(9, 4))
    ax = fig.add_subplot()
    M = scenario_set.matrix()
    x = np.arange(scenario_set.start_day, scenario_set.start_day + M.shape[1])
    if history is not None:
        v = np.asarray(history.values[-tail_days:])
        ax.plot(np.arange(history.end_day - len(v) + 1, history.end_day + 1), v, color="black", linewidth=0.6,
                label="history")
    for row in M:
        ax.plot(x, row, color="#2b6ca3", alpha=0.15, linewidth=0.5)
    ax.plot(x, M.mean(axis=0), color="#b22222", linewidth=1.0, label="scenario mean")
    ax.set_xlabel("day index")
    ax.set_ylabel("GDU")
    ax.set_title(f"{len(M)} GDU scenarios")
    ax.legend(loc="upper right", frameon=False)
    fig.tight_layout()
    _save(fig, path)
