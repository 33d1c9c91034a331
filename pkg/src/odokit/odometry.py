"""Dead reckoning from an encoder log.

The pipeline per interval: count deltas -> raw wheel rates -> rpm table ->
balance scale -> wheel displacements -> pose step with the heading gain
applied to the heading increment.
"""

from __future__ import annotations

from typing import Sequence

from odokit.calibration import CalibrationProfile
from odokit.encoder import EncoderConfig, EncoderSample, SpeedFilterConfig, WheelInterval, samples_to_speeds
from odokit.kinematics import Pose2D, VehicleGeometry, WheelDisplacements, integrate_pose
from odokit.trajectory import Trajectory


def corrected_displacements(
    interval: WheelInterval, profile: CalibrationProfile
) -> WheelDisplacements:
    """Wheel displacements after rpm correction and balance.

    With an identity profile the raw fixed-point displacements pass
    through untouched.
    """
    if profile.is_identity:
        return interval.displacements
    raw = interval.raw_speeds
    fixed = profile.correct_speeds(raw)
    disp = interval.displacements

    def rescale(d: float, raw_rate: float, fixed_rate: float) -> float:
        return 0.0 if raw_rate == 0 else d * (fixed_rate / raw_rate)

    return WheelDisplacements(
        rescale(disp.left, raw.left, fixed.left),
        rescale(disp.right, raw.right, fixed.right),
    )


def estimate_trajectory(
    log: Sequence[EncoderSample],
    geom: VehicleGeometry,
    encoder: EncoderConfig,
    profile: CalibrationProfile | None = None,
    start: Pose2D | None = None,
    filt: SpeedFilterConfig | None = None,
    midpoint_heading: bool = False,
) -> Trajectory:
    """Integrate an encoder log into an estimated trajectory."""
    profile = profile or CalibrationProfile()
    pose = start or Pose2D()
    samples = [(log[0].t / 1000.0, pose)]
    for interval in samples_to_speeds(log, encoder, filt, geom):
        disp = corrected_displacements(interval, profile)
        pose = integrate_pose(
            pose, disp, geom, heading_gain=profile.heading_gain, midpoint_heading=midpoint_heading
        )
        samples.append((interval.t, pose))
    return Trajectory(tuple(samples))
