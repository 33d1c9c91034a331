"""Differential-drive motion model and first-order dead-reckoning step.

Conventions: x forward, y left, heading counter-clockwise from the x axis,
wheel rates in rad/s (positive drives the vehicle forward).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from odokit.errors import ConfigurationError

DEFAULT_WHEEL_RADIUS = 0.15  # 30 cm wheel
DEFAULT_TRACK_WIDTH = 0.56
MOTOR_MAX_RPM = 106.0
MAX_WHEEL_SPEED = MOTOR_MAX_RPM * 2.0 * math.pi / 60.0

# below this |omega * dt| the arc and straight-line formulas agree to double precision
ARC_STRAIGHT_THRESHOLD = 1e-9

_TWO_PI = 2.0 * math.pi


def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


def wrap_angle(theta: float) -> float:
    """Normalize an angle to [-pi, pi).

    Values already inside the interval are returned unchanged, which makes
    the function exactly idempotent.
    """
    _check_finite("theta", theta)
    if -math.pi <= theta < math.pi:
        return theta
    wrapped = (theta + math.pi) % _TWO_PI - math.pi
    # float modulo can land on the excluded upper bound
    if wrapped >= math.pi:
        wrapped -= _TWO_PI
    elif wrapped < -math.pi:
        wrapped += _TWO_PI
    return wrapped


@dataclass(frozen=True)
class Pose2D:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        _check_finite("pose", self.x, self.y, self.theta)
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class Twist2D:
    v: float
    omega: float

    def __post_init__(self):
        _check_finite("twist", self.v, self.omega)


@dataclass(frozen=True)
class WheelAngularSpeeds:
    left: float
    right: float

    def __post_init__(self):
        _check_finite("wheel speeds", self.left, self.right)

    def max_abs(self) -> float:
        return max(abs(self.left), abs(self.right))


@dataclass(frozen=True)
class WheelDisplacements:
    """Ground distance travelled by each wheel over one interval, in meters."""

    left: float
    right: float

    def __post_init__(self):
        _check_finite("wheel displacements", self.left, self.right)

    @property
    def center(self) -> float:
        return (self.left + self.right) / 2.0


@dataclass(frozen=True)
class VehicleGeometry:
    wheel_radius: float = DEFAULT_WHEEL_RADIUS
    track_width: float = DEFAULT_TRACK_WIDTH

    def __post_init__(self):
        for name in ("wheel_radius", "track_width"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be a positive finite number, got {value!r}")


def forward_kinematics(speeds: WheelAngularSpeeds, geom: VehicleGeometry) -> Twist2D:
    """Body twist produced by the given wheel angular rates."""
    r = geom.wheel_radius
    v = r / 2.0 * (speeds.right + speeds.left)
    omega = r / geom.track_width * (speeds.right - speeds.left)
    return Twist2D(v, omega)


def inverse_kinematics(twist: Twist2D, geom: VehicleGeometry) -> WheelAngularSpeeds:
    """Wheel angular rates that realise ``twist``."""
    r = geom.wheel_radius
    half_turn = twist.omega * geom.track_width / 2.0
    return WheelAngularSpeeds(
        left=(twist.v - half_turn) / r,
        right=(twist.v + half_turn) / r,
    )


def integrate_pose(
    pose: Pose2D,
    disp: WheelDisplacements,
    geom: VehicleGeometry,
    *,
    heading_gain: float = 1.0,
    midpoint_heading: bool = False,
) -> Pose2D:
    """Advance ``pose`` by one odometry interval.

    The translation uses the heading at the start of the interval. With
    ``midpoint_heading`` it uses the heading halfway through the rotation
    instead. ``heading_gain`` scales the heading increment only; the
    distance travelled is never affected by it.
    """
    d_center = disp.center
    d_theta = heading_gain * (disp.right - disp.left) / geom.track_width
    heading = pose.theta + d_theta / 2.0 if midpoint_heading else pose.theta
    return Pose2D(
        pose.x + d_center * math.cos(heading),
        pose.y + d_center * math.sin(heading),
        pose.theta + d_theta,
    )


def exact_arc_step(pose: Pose2D, twist: Twist2D, dt: float) -> Pose2D:
    """Closed-form pose after moving with a constant twist for ``dt`` seconds.

    The vehicle follows a circle of radius v/omega about the instantaneous
    centre of curvature, or a straight line when the turn is negligible.
    """
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt!r}")
    d_theta = twist.omega * dt
    if abs(d_theta) < ARC_STRAIGHT_THRESHOLD:
        heading = pose.theta + d_theta / 2.0
        dist = twist.v * dt
        return Pose2D(
            pose.x + dist * math.cos(heading),
            pose.y + dist * math.sin(heading),
            pose.theta + d_theta,
        )
    radius = twist.v / twist.omega
    theta_end = pose.theta + d_theta
    return Pose2D(
        pose.x + radius * (math.sin(theta_end) - math.sin(pose.theta)),
        pose.y - radius * (math.cos(theta_end) - math.cos(pose.theta)),
        theta_end,
    )
