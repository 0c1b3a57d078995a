"""Artifact writers: deterministic CSV emission (UTF-8, '.' decimal, no
locale) plus figure rendering for each command's report path."""

from __future__ import annotations

import csv
import os
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "fmt",
    "write_csv",
    "render_simulate_figure",
    "render_predict_figure",
    "render_price_figure",
    "render_hedge_figure",
    "render_verify_figure",
]


def fmt(value) -> str:
    """Shortest round-trip decimal form; identical across runs and platforms."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Write rows through ``fmt`` with a fixed dialect; returns the path."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _save(fig, path: str) -> str:
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def render_simulate_figure(grid, s_paths: np.ndarray, path: str,
                           max_paths: int = 30) -> str:
    """Sample of simulated asset paths over time."""
    fig, ax = plt.subplots(figsize=(7, 4))
    t = grid.points
    for row in np.atleast_2d(s_paths)[:max_paths]:
        ax.plot(t, row, lw=0.8, alpha=0.7)
    ax.set_xlabel("t")
    ax.set_ylabel("S_t")
    ax.set_title("simulated asset paths")
    return _save(fig, path)


def render_predict_figure(grid, x_path: np.ndarray, u_index: int,
                          mean: np.ndarray, rho: np.ndarray, path: str) -> str:
    """Observed noise path with the conditional mean and a 2-sd band."""
    fig, ax = plt.subplots(figsize=(7, 4))
    t = grid.points
    ax.plot(t[: u_index + 1], x_path[: u_index + 1], "k-", lw=1.2,
            label="observed")
    ax.plot(t[u_index:], mean[u_index:], "C0-", lw=1.2, label="conditional mean")
    ax.fill_between(t[u_index:], mean[u_index:] - 2 * rho[u_index:],
                    mean[u_index:] + 2 * rho[u_index:], color="C0", alpha=0.2,
                    label="2 sd band")
    ax.axvline(t[u_index], color="gray", ls=":", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("X_t")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("prediction law given the path through u")
    return _save(fig, path)


def render_price_figure(x_values: np.ndarray, values: np.ndarray,
                        deltas: np.ndarray, path: str) -> str:
    """Value and delta slices at the earliest tabulated time."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(x_values, values, "C0-")
    ax1.set_xlabel("x")
    ax1.set_ylabel("value")
    ax2.plot(x_values, deltas, "C1-")
    ax2.set_xlabel("x")
    ax2.set_ylabel("delta")
    fig.suptitle("frictionless value and replicating position")
    return _save(fig, path)


def render_hedge_figure(traces, grid, path: str, max_paths: int = 20) -> str:
    """Terminal tracking-error histogram plus sample wealth trajectories."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    errs = [tr.tracking_error for tr in traces if tr.aborted is None]
    if errs:
        ax1.hist(errs, bins=min(40, max(5, len(errs) // 5)), color="C0",
                 alpha=0.8)
    ax1.set_xlabel("terminal tracking error")
    ax1.set_ylabel("count")
    for tr in traces[:max_paths]:
        ts = [s.t for s in tr.steps] + [tr.terminal_time]
        vs = [s.v_k for s in tr.steps] + [tr.v_terminal]
        ax2.plot(ts, vs, lw=0.8, alpha=0.7)
    ax2.set_xlabel("t")
    ax2.set_ylabel("wealth with costs")
    fig.suptitle("conditional-mean hedge diagnostics")
    return _save(fig, path)


def render_verify_figure(results, path: str) -> str:
    """One bar per check, green for pass and red for fail."""
    fig, ax = plt.subplots(figsize=(7, 0.5 * max(4, len(results))))
    names = [r[0] for r in results]
    passed = [bool(r[1]) for r in results]
    colors = ["C2" if ok else "C3" for ok in passed]
    ax.barh(range(len(names)), [1.0] * len(names), color=colors, alpha=0.8)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xticks([])
    ax.invert_yaxis()
    ax.set_title("verification checks")
    return _save(fig, path)
