"""Compare estimated and true trajectories; render both paths."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import matplotlib

from odokit import plotting
from odokit.trajectory import Trajectory


@dataclass(frozen=True)
class ErrorReport:
    endpoint_error_x: float
    endpoint_error_y: float
    endpoint_error_norm: float
    per_waypoint_errors: list[tuple[int, float, float]] = field(default_factory=list)
    path_length: float = 0.0

    def to_dict(self) -> dict:
        return {
            "endpoint_error_x": self.endpoint_error_x,
            "endpoint_error_y": self.endpoint_error_y,
            "endpoint_error_norm": self.endpoint_error_norm,
            "per_waypoint_errors": [[i, dx, dy] for i, dx, dy in self.per_waypoint_errors],
            "path_length": self.path_length,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def endpoint_error(estimate: Trajectory, truth: Trajectory) -> tuple[float, float, float]:
    """Final-position difference, estimate minus truth, in the truth frame."""
    if not len(estimate) or not len(truth):
        raise ValueError("endpoint_error needs two nonempty trajectories")
    e, t = estimate.final, truth.final
    dx, dy = e.x - t.x, e.y - t.y
    return dx, dy, math.hypot(dx, dy)


def waypoint_errors(
    estimate: Trajectory, truth: Trajectory, times: Sequence[float]
) -> list[tuple[float, float]]:
    """Position differences at the given times (both trajectories interpolated)."""
    out = []
    for t in times:
        e, g = estimate.pose_at(t), truth.pose_at(t)
        out.append((e.x - g.x, e.y - g.y))
    return out


def evaluate(
    estimate: Trajectory, truth: Trajectory, waypoint_times: Sequence[float] = ()
) -> ErrorReport:
    dx, dy, norm = endpoint_error(estimate, truth)
    per_waypoint = [
        (i, wx, wy) for i, (wx, wy) in enumerate(waypoint_errors(estimate, truth, waypoint_times))
    ]
    return ErrorReport(dx, dy, norm, per_waypoint, truth.path_length())


def write_report(report: ErrorReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json())


def format_endpoint(dx: float, dy: float, norm: float) -> str:
    # + 0.0 folds negative zero
    return " ".join(format(v + 0.0, ".4g") for v in (dx, dy, norm))


def render_paths(estimate: Trajectory, truth: Trajectory, path: str | Path, title: str | None = None) -> None:
    """Overlay both paths in an SVG with start and end markers."""
    if not len(estimate) or not len(truth):
        raise ValueError("render_paths needs two nonempty trajectories")
    with matplotlib.rc_context(plotting.STYLE):
        fig = plotting.new_figure()
        ax = fig.add_subplot()
        for traj, style, name in ((truth, plotting.TRUTH_STYLE, "truth"), (estimate, plotting.ESTIMATE_STYLE, "estimate")):
            pts = plotting.simplify_polyline([(p.x, p.y) for p in traj.poses])
            xs, ys = zip(*pts)
            if len(pts) > 1:
                ax.plot(xs, ys, gid=f"{name}-path", **style)
            ax.plot(xs[0], ys[0], marker="o", color=style["color"], linestyle="none", gid=f"{name}-start")
            if len(pts) > 1:
                ax.plot(xs[-1], ys[-1], marker="s", color=style["color"], linestyle="none", gid=f"{name}-end")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_aspect("equal", adjustable="datalim")
        if title:
            ax.set_title(title)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="best")
        fig.tight_layout()
        plotting.save_svg(fig, path)
