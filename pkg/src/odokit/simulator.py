"""Ground-truth differential-drive simulation with injectable encoder faults.

Truth is advanced with the closed-form arc step, so any error in the
estimate comes from sensing and from the first-order odometry update,
never from the simulator itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from odokit.calibration import CalibrationProfile, fit_rpm_correction
from odokit.encoder import EncoderConfig, EncoderSample, SpeedFilterConfig, counts_to_rpm
from odokit.errors import ConfigurationError, PlanError
from odokit.kinematics import (
    MAX_WHEEL_SPEED,
    Pose2D,
    Twist2D,
    VehicleGeometry,
    WheelAngularSpeeds,
    exact_arc_step,
    forward_kinematics,
    inverse_kinematics,
    wrap_angle,
)
from odokit.odometry import estimate_trajectory
from odokit.trajectory import Trajectory

# Bench tachometer readings, reused as the default reference speeds of a
# simulated tachometer session
TACHOMETER_RPMS = (33.0, 53.0, 72.0, 92.0, 114.0, 137.0)

_TIME_EPS = 1e-9


@dataclass(frozen=True)
class NoiseModel:
    left_scale_error: float = 1.0
    right_scale_error: float = 1.0
    slip_noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.left_scale_error > 0 and self.right_scale_error > 0):
            raise ConfigurationError("scale errors must be positive")
        if not (math.isfinite(self.slip_noise_std) and self.slip_noise_std >= 0):
            raise ConfigurationError("slip_noise_std must be non-negative")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigurationError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    sample_period: float = 1.0
    geometry: VehicleGeometry = field(default_factory=VehicleGeometry)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError("dt must be positive")
        if not (math.isfinite(self.sample_period) and self.sample_period > 0):
            raise ConfigurationError("sample_period must be positive")
        ratio = self.sample_period / self.dt
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigurationError(
                f"sample_period ({self.sample_period}) must be an integer multiple of dt ({self.dt})"
            )
        if abs(self.sample_period * 1000 - round(self.sample_period * 1000)) > 1e-6:
            raise ConfigurationError("sample_period must be a whole number of milliseconds")

    @property
    def steps_per_sample(self) -> int:
        return round(self.sample_period / self.dt)


@dataclass(frozen=True)
class WaypointPlan:
    waypoints: tuple[tuple[float, float], ...]
    cruise_speed: float = 0.3
    turn_rate: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple((float(x), float(y)) for x, y in self.waypoints))
        if len(self.waypoints) < 2:
            raise PlanError("a plan needs at least 2 waypoints")
        if not (self.cruise_speed > 0 and self.turn_rate > 0):
            raise PlanError("cruise_speed and turn_rate must be positive")


class ScheduleEntry(NamedTuple):
    duration: float
    speeds: WheelAngularSpeeds
    kind: str  # "straight", "turn" or "stop"


def _checked_speeds(twist: Twist2D, geom: VehicleGeometry, max_wheel_speed: float) -> WheelAngularSpeeds:
    speeds = inverse_kinematics(twist, geom)
    if speeds.max_abs() > max_wheel_speed:
        raise PlanError(
            f"commanded wheel speed {speeds.max_abs():.3f} rad/s exceeds the limit of "
            f"{max_wheel_speed:.3f} rad/s"
        )
    return speeds


def _padding(duration: float, align_period: float | None) -> float:
    if not align_period:
        return 0.0
    pad = math.ceil(duration / align_period - _TIME_EPS) * align_period - duration
    return pad if pad > _TIME_EPS else 0.0


def plan_schedule(
    plan: WaypointPlan,
    geom: VehicleGeometry,
    *,
    start_heading: float = 0.0,
    final_heading: float | None = None,
    align_period: float | None = None,
    max_wheel_speed: float = MAX_WHEEL_SPEED,
) -> list[ScheduleEntry]:
    """Open-loop turn-then-drive schedule through the waypoints.

    Every corner is a spin in place. With ``align_period`` each motion is
    followed by a stop lasting until the next multiple of that period, so
    no sampling interval mixes rotation with translation.
    """
    turn_speeds = _checked_speeds(Twist2D(0.0, plan.turn_rate), geom, max_wheel_speed)
    drive_speeds = _checked_speeds(Twist2D(plan.cruise_speed, 0.0), geom, max_wheel_speed)
    stop = WheelAngularSpeeds(0.0, 0.0)
    schedule: list[ScheduleEntry] = []

    def add(duration: float, speeds: WheelAngularSpeeds, kind: str):
        schedule.append(ScheduleEntry(duration, speeds, kind))
        pad = _padding(duration, align_period)
        if pad:
            schedule.append(ScheduleEntry(pad, stop, "stop"))

    def turn(delta: float):
        if abs(delta) < 1e-12:
            return
        speeds = turn_speeds if delta > 0 else WheelAngularSpeeds(turn_speeds.right, turn_speeds.left)
        add(abs(delta) / plan.turn_rate, speeds, "turn")

    heading = start_heading
    for (x0, y0), (x1, y1) in zip(plan.waypoints, plan.waypoints[1:]):
        dist = math.hypot(x1 - x0, y1 - y0)
        if dist == 0:
            continue
        bearing = math.atan2(y1 - y0, x1 - x0)
        turn(wrap_angle(bearing - heading))
        add(dist / plan.cruise_speed, drive_speeds, "straight")
        heading = bearing
    if final_heading is not None:
        turn(wrap_angle(final_heading - heading))
    return schedule


def square_plan(side: float, cruise_speed: float = 0.3, turn_rate: float = 0.5) -> WaypointPlan:
    if not (math.isfinite(side) and side > 0):
        raise PlanError(f"square side must be positive, got {side!r}")
    corners = ((0.0, 0.0), (side, 0.0), (side, side), (0.0, side), (0.0, 0.0))
    return WaypointPlan(corners, cruise_speed, turn_rate)


def follow_square(
    side: float,
    cruise_speed: float = 0.3,
    turn_rate: float = 0.5,
    geom: VehicleGeometry | None = None,
    *,
    final_turn: bool = True,
    align_period: float | None = None,
    max_wheel_speed: float = MAX_WHEEL_SPEED,
) -> list[ScheduleEntry]:
    """Counter-clockwise square from the origin, heading along +x.

    Four legs with +90 degree spins between them; ``final_turn`` adds the
    fourth spin so the commanded heading ends at +360 degrees.
    """
    plan = square_plan(side, cruise_speed, turn_rate)
    return plan_schedule(
        plan,
        geom or VehicleGeometry(),
        final_heading=0.0 if final_turn else None,
        align_period=align_period,
        max_wheel_speed=max_wheel_speed,
    )


def schedule_duration(schedule: Sequence[ScheduleEntry]) -> float:
    return math.fsum(e.duration for e in schedule)


def waypoint_times(schedule: Sequence[ScheduleEntry]) -> list[float]:
    """Start time plus the end time of each straight leg."""
    times, t = [0.0], 0.0
    for entry in schedule:
        t += entry.duration
        if entry.kind == "straight":
            times.append(t)
    return times


def step_truth(state: Pose2D, speeds: WheelAngularSpeeds, geom: VehicleGeometry, dt: float) -> Pose2D:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    return exact_arc_step(state, forward_kinematics(speeds, geom), dt)


def sense(
    true_angles: tuple[float, float],
    noise: NoiseModel,
    encoder: EncoderConfig,
    slip_angles: tuple[float, float] = (0.0, 0.0),
    t_ms: int = 0,
) -> EncoderSample:
    """Cumulative encoder counts for the accumulated true wheel angles.

    The corrupted angle is quantized by flooring the cumulative value, so
    quantization error stays below one count however long the run.
    """
    cpr = encoder.counts_per_wheel_rev

    def count(angle: float, scale: float, slip: float) -> int:
        return math.floor((angle * scale + slip) / (2.0 * math.pi) * cpr)

    return EncoderSample(
        t_ms,
        count(true_angles[0], noise.left_scale_error, slip_angles[0]),
        count(true_angles[1], noise.right_scale_error, slip_angles[1]),
    )


def simulate(
    cfg: SimConfig, schedule: Sequence[ScheduleEntry], start: Pose2D | None = None
) -> tuple[Trajectory, list[EncoderSample]]:
    """Run ``schedule`` at the physics step and sample truth and encoders.

    Physics steps that straddle a schedule boundary are split at the
    boundary. The run is padded to a whole number of sample periods.
    """
    geom, dt, per_sample = cfg.geometry, cfg.dt, cfg.steps_per_sample
    rng = np.random.default_rng(cfg.noise.seed)
    slip_scale = cfg.noise.slip_noise_std * math.sqrt(dt)

    ends, t_acc = [], 0.0
    for entry in schedule:
        t_acc += entry.duration
        ends.append(t_acc)
    n_steps = max(1, math.ceil(t_acc / dt - _TIME_EPS))
    n_steps = -(-n_steps // per_sample) * per_sample

    pose = start or Pose2D()
    angle_l = angle_r = 0.0
    slip_l = slip_r = 0.0
    truth = [(0.0, pose)]
    log = [sense((0.0, 0.0), cfg.noise, cfg.encoder, (0.0, 0.0), 0)]
    seg = 0
    for k in range(n_steps):
        t0, t1 = k * dt, (k + 1) * dt
        t = t0
        while seg < len(schedule) and t < t1:
            seg_end = ends[seg]
            piece_end = min(t1, seg_end)
            h = piece_end - t
            if h > 0:
                speeds = schedule[seg].speeds
                pose = step_truth(pose, speeds, geom, h)
                angle_l += speeds.left * h
                angle_r += speeds.right * h
            t = piece_end
            if seg_end <= t1:
                seg += 1
        if slip_scale:
            n = rng.standard_normal(2)
            slip_l += slip_scale * float(n[0])
            slip_r += slip_scale * float(n[1])
        if (k + 1) % per_sample == 0:
            sample_idx = (k + 1) // per_sample
            t_ms = round(sample_idx * cfg.sample_period * 1000)
            truth.append((t_ms / 1000.0, pose))
            log.append(sense((angle_l, angle_r), cfg.noise, cfg.encoder, (slip_l, slip_r), t_ms))
    return Trajectory(tuple(truth)), log


def run_experiment(
    cfg: SimConfig,
    plan: WaypointPlan | Sequence[ScheduleEntry],
    profile: CalibrationProfile | None = None,
    filt: SpeedFilterConfig | None = None,
) -> tuple[Trajectory, list[EncoderSample], Trajectory]:
    """Simulate, log, and dead-reckon one run. Returns (truth, log, estimate)."""
    if isinstance(plan, WaypointPlan):
        schedule = plan_schedule(plan, cfg.geometry, align_period=cfg.sample_period)
    else:
        schedule = list(plan)
    truth, log = simulate(cfg, schedule)
    estimate = estimate_trajectory(log, cfg.geometry, cfg.encoder, profile, filt=filt)
    return truth, log, estimate


def tachometer_session(
    noise: NoiseModel,
    encoder: EncoderConfig,
    reference_rpms: Sequence[float] = TACHOMETER_RPMS,
    duration: float = 10.0,
) -> list[tuple[float, float, float]]:
    """Spin both wheels at each reference rpm and read the (faulty) encoders.

    Returns rows of (encoder_rpm_left, encoder_rpm_right, tachometer_rpm).
    """
    rng = np.random.default_rng(noise.seed)
    rows = []
    for rpm in reference_rpms:
        angle = rpm / 60.0 * 2.0 * math.pi * duration
        slip = (0.0, 0.0)
        if noise.slip_noise_std:
            slip = tuple(noise.slip_noise_std * math.sqrt(duration) * rng.standard_normal(2))
        sample = sense((angle, angle), noise, encoder, slip)
        rows.append(
            (
                counts_to_rpm(sample.left_count, duration, encoder),
                counts_to_rpm(sample.right_count, duration, encoder),
                float(rpm),
            )
        )
    return rows


def fit_profile_from_session(rows: Sequence[tuple[float, float, float]], **metadata: str) -> CalibrationProfile:
    return CalibrationProfile(
        rpm_table_left=fit_rpm_correction((left, tach) for left, _, tach in rows),
        rpm_table_right=fit_rpm_correction((right, tach) for _, right, tach in rows),
        metadata=dict(metadata),
    )
