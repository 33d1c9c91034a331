"""Timestamped pose sequences and their CSV form."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from odokit.errors import SchemaError, StreamError
from odokit.kinematics import Pose2D, wrap_angle

TRAJECTORY_HEADER = ("t_s", "x_m", "y_m", "theta_rad")


@dataclass(frozen=True)
class Trajectory:
    samples: tuple[tuple[float, Pose2D], ...]

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        for i in range(1, len(samples)):
            if not samples[i][0] > samples[i - 1][0]:
                raise StreamError(f"trajectory times must be strictly increasing (sample {i})", index=i)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.samples]

    @property
    def poses(self) -> list[Pose2D]:
        return [p for _, p in self.samples]

    @property
    def final(self) -> Pose2D:
        if not self.samples:
            raise ValueError("trajectory is empty")
        return self.samples[-1][1]

    def path_length(self) -> float:
        poses = self.poses
        return math.fsum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(poses, poses[1:]))

    def pose_at(self, t: float) -> Pose2D:
        """Pose at time ``t``: linear in position, shortest arc in heading."""
        times = self.times
        if not times or not (times[0] <= t <= times[-1]):
            span = f"[{times[0]}, {times[-1]}]" if times else "empty"
            raise ValueError(f"time {t} outside trajectory span {span}")
        i = bisect.bisect_left(times, t)
        if times[i] == t:
            return self.samples[i][1]
        (t0, p0), (t1, p1) = self.samples[i - 1], self.samples[i]
        w = (t - t0) / (t1 - t0)
        d_theta = wrap_angle(p1.theta - p0.theta)
        return Pose2D(p0.x + w * (p1.x - p0.x), p0.y + w * (p1.y - p0.y), p0.theta + w * d_theta)

    def translated(self, dx: float, dy: float) -> "Trajectory":
        return Trajectory(tuple((t, Pose2D(p.x + dx, p.y + dy, p.theta)) for t, p in self.samples))


def _fmt(value: float) -> str:
    return format(value, ".17g")


def write_trajectory(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for t, p in traj.samples:
            writer.writerow((_fmt(t), _fmt(p.x), _fmt(p.y), _fmt(p.theta)))


def read_trajectory(path: str | Path) -> Trajectory:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAJECTORY_HEADER:
            raise SchemaError(
                f"{path}: line 1: expected header {','.join(TRAJECTORY_HEADER)!r}, got {header!r}"
            )
        samples = []
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise SchemaError(f"{path}: line {reader.line_num}: expected 4 fields, got {len(row)}")
            try:
                t, x, y, theta = (float(v) for v in row)
                samples.append((t, Pose2D(x, y, theta)))
            except ValueError as exc:
                raise SchemaError(f"{path}: line {reader.line_num}: {exc}") from None
    try:
        return Trajectory(tuple(samples))
    except StreamError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def from_poses(times: Iterable[float], poses: Iterable[Pose2D]) -> Trajectory:
    return Trajectory(tuple(zip(times, poses)))
