"""Figures for simulation runs and benchmark reports (written to files)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .avoidance import STAGES  # noqa: E402
from .sim import BoxObstacle, Scenario, SimLog  # noqa: E402


def plot_run(log: SimLog, scenario: Scenario, path) -> Path:
    """Top and side views of the flown path with obstacles and replan points."""
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
    path_xyz = log.path if log.path is not None else np.zeros((0, 3))
    switch = [s for s in log.steps if s.decision != "keep"]
    for ax, (i, j), title in zip(axes, ((0, 1), (0, 2)), ("top view", "side view")):
        for ob in scenario.obstacles:
            if isinstance(ob, BoxObstacle):
                lo, hi = ob.lo, ob.hi
                ax.add_patch(Rectangle((lo[i], lo[j]), hi[i] - lo[i], hi[j] - lo[j],
                                       color="0.6", alpha=0.6))
                if ob.moving:
                    # swept center from spawn to the end of the run
                    ts = np.linspace(ob.spawn, max(ob.spawn, log.total_time), 20)
                    c = np.array([0.5 * np.add(*ob.bounds(t)) for t in ts])
                    ax.plot(c[:, i], c[:, j], "--", color="0.4", lw=1)
                    elo, ehi = ob.bounds(ts[-1])
                    ax.add_patch(Rectangle((elo[i], elo[j]), ehi[i] - elo[i], ehi[j] - elo[j],
                                           fill=False, ec="0.4"))
            else:
                ax.scatter(ob.points[:, i], ob.points[:, j], s=2, c="0.5")
        if len(path_xyz):
            ax.plot(path_xyz[:, i], path_xyz[:, j], "b-", lw=1.5, label="flown path")
        for w in scenario.waypoints:
            ax.plot(w[i], w[j], "g*", ms=12)
        for s in switch:
            c = "r" if s.decision == "emergency" else "orange"
            ax.plot(s.state.position[i], s.state.position[j], "o", color=c, ms=5)
            if s.waypoint is not None:
                ax.plot(s.waypoint[i], s.waypoint[j], "x", color=c, ms=7)
        ax.set_xlabel("xyz"[i] + " [m]")
        ax.set_ylabel("xyz"[j] + " [m]")
        ax.set_title(title)
        ax.set_aspect("equal", adjustable="datalim")
        ax.grid(alpha=0.3)
    status = "collision" if log.collision else ("goal" if log.goal_reached else log.termination)
    fig.suptitle(f"{scenario.name}: {status}, {log.replans} replans, "
                 f"min clearance ratio {log.min_clearance:.2f}")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_bench(report, path) -> Path:
    """Mean time per stage and the cropping ablation."""
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    means = [report.stages[k]["mean"] for k in STAGES]
    a1.bar(STAGES, means, color="tab:blue")
    a1.set_ylabel("mean time per candidate [us]")
    a1.set_title(f"total {report.total['mean']:.0f} us, {report.n_points} points")
    a1.tick_params(axis="x", rotation=30)
    a2.bar(["with crop", "without crop"], [report.crop_on_us, report.crop_off_us],
           color=["tab:green", "tab:red"])
    a2.set_yscale("log")
    a2.set_ylabel("checking time [us]")
    a2.set_title(f"crop speedup {report.crop_speedup:.1f}x")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
