"""Figures for runs, batches and field snapshots (written to files, never shown)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata=_META)
    plt.close(fig)


def plot_run(trace, grid_values, path, t: int | None = None) -> None:
    """Map with the actor's route (blue), its last plan (green) and sensor tracks (red)."""
    values = np.asarray(grid_values, dtype=float)
    steps = trace.steps if t is None else trace.steps[:t + 1]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(values, cmap="Greys", vmin=0, vmax=1, interpolation="nearest")
    route = np.array(trace.actor_route[:len(steps) + 1])
    ax.plot(route[:, 1], route[:, 0], color="tab:blue", lw=2, label="actor")
    if steps and steps[-1].path:
        plan = np.array(steps[-1].path)
        ax.plot(plan[:, 1], plan[:, 0], color="tab:green", lw=1.5, ls="--", label="plan")
    for i, sr in enumerate(trace.sensor_routes):
        sr = np.array(sr[:len(steps) + 1])
        ax.plot(sr[:, 1], sr[:, 0], color="tab:red", lw=1, alpha=0.8,
                label="sensors" if i == 0 else None)
        ax.plot(sr[0, 1], sr[0, 0], "o", color="tab:red", ms=4)
    sc = trace.scenario
    ax.plot(sc.actor_start[1], sc.actor_start[0], "s", color="tab:blue", ms=6)
    ax.plot(sc.actor_goal[1], sc.actor_goal[0], "*", color="gold", mec="k", ms=12)
    ax.set_title(f"{sc.mode}  seed={trace.seed}  cost={trace.cost:.3f}  bits={trace.total_bits}",
                 fontsize=8)
    ax.set_xticks([])
    ax.set_yticks([])
    ax.legend(loc="lower right", fontsize=7)
    _save(fig, path)


def plot_batch(report, path) -> None:
    """Mean cost and bit ratios per variant."""
    rows = report.summary()
    labels = [r[0] for r in rows]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(1.2 * len(labels) + 2, 3))
    ax.bar(x - 0.2, [r[2] for r in rows], 0.4, label="r_cost")
    ax.bar(x + 0.2, [r[3] for r in rows], 0.4, label="r_bits")
    ax.axhline(1.0, color="k", lw=0.8, ls=":")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, fontsize=8)
    ax.set_ylabel("ratio")
    ax.set_title(f"{len(report.of(labels[0]))} seeds", fontsize=8)
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_field(values, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(np.asarray(values, dtype=float), cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(title, fontsize=8)
    ax.set_xticks([])
    ax.set_yticks([])
    _save(fig, path)
