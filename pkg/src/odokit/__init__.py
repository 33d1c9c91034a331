"""Wheel odometry toolkit for differential-drive vehicles."""

__version__ = "0.1.0"

from odokit.errors import (
    ConfigurationError,
    FitError,
    OdometryError,
    PlanError,
    SchemaError,
    StreamError,
)
from odokit.kinematics import (
    Pose2D,
    Twist2D,
    VehicleGeometry,
    WheelAngularSpeeds,
    WheelDisplacements,
    exact_arc_step,
    forward_kinematics,
    integrate_pose,
    inverse_kinematics,
    wrap_angle,
)

__all__ = [
    "__version__",
    "ConfigurationError",
    "FitError",
    "OdometryError",
    "PlanError",
    "SchemaError",
    "StreamError",
    "Pose2D",
    "Twist2D",
    "VehicleGeometry",
    "WheelAngularSpeeds",
    "WheelDisplacements",
    "exact_arc_step",
    "forward_kinematics",
    "integrate_pose",
    "inverse_kinematics",
    "wrap_angle",
]
