"""Matplotlib styling and deterministic SVG output for report figures."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib
from matplotlib.figure import Figure

STYLE = {
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 9,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.6,
    # fixed element ids and no embedded fonts keep the SVG byte-stable
    "svg.hashsalt": "odokit",
    "svg.fonttype": "none",
}

TRUTH_STYLE = dict(color="black", linestyle="-", label="actual path")
ESTIMATE_STYLE = dict(color="tab:red", linestyle="--", label="wheel odometry")


def new_figure(width: float = 5.5, height: float = 5.0) -> Figure:
    return Figure(figsize=(width, height))


def simplify_polyline(points: Sequence[tuple[float, float]], tol: float = 1e-9) -> list[tuple[float, float]]:
    """Drop repeated points and interior points collinear with their neighbours."""
    out: list[tuple[float, float]] = []
    for p in points:
        if out and math.isclose(p[0], out[-1][0], abs_tol=tol) and math.isclose(p[1], out[-1][1], abs_tol=tol):
            continue
        if len(out) >= 2:
            a, b = out[-2], out[-1]
            ux, uy = b[0] - a[0], b[1] - a[1]
            vx, vy = p[0] - b[0], p[1] - b[1]
            cross = ux * vy - uy * vx
            same_way = ux * vx + uy * vy > 0
            if same_way and abs(cross) <= tol * math.hypot(ux, uy) * math.hypot(vx, vy):
                out[-1] = p
                continue
        out.append(p)
    return out


def save_svg(fig: Figure, path: str | Path) -> None:
    with matplotlib.rc_context(STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "odokit"})
