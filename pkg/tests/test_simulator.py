import math

import pytest

from odokit.calibration import CalibrationProfile
from odokit.encoder import EncoderConfig, counts_to_distance, counts_to_rpm
from odokit.errors import ConfigurationError, PlanError
from odokit.kinematics import (
    Pose2D,
    Twist2D,
    VehicleGeometry,
    WheelAngularSpeeds,
    exact_arc_step,
    forward_kinematics,
    inverse_kinematics,
)
from odokit.simulator import (
    NoiseModel,
    ScheduleEntry,
    SimConfig,
    WaypointPlan,
    fit_profile_from_session,
    follow_square,
    plan_schedule,
    run_experiment,
    sense,
    simulate,
    step_truth,
    tachometer_session,
    waypoint_times,
)

GEOM = VehicleGeometry()
ENC = EncoderConfig()
ARC = counts_to_distance(1, ENC, GEOM.wheel_radius)


def fold_exact(schedule, start=Pose2D()):
    pose = start
    for entry in schedule:
        pose = exact_arc_step(pose, forward_kinematics(entry.speeds, GEOM), entry.duration)
    return pose


def true_wheel_angles(schedule, t):
    """Oracle: integrate piecewise-constant wheel rates up to time t."""
    left = right = 0.0
    start = 0.0
    for entry in schedule:
        h = min(max(t - start, 0.0), entry.duration)
        left += entry.speeds.left * h
        right += entry.speeds.right * h
        start += entry.duration
    return left, right


# --- truth stepping ---------------------------------------------------------------

def test_step_truth_spin_quarter_turn():
    omega = 0.5
    speeds = inverse_kinematics(Twist2D(0, omega), GEOM)
    pose = step_truth(Pose2D(1, 2, 0), speeds, GEOM, math.pi / (2 * omega))
    assert (pose.x, pose.y) == (1, 2)
    assert pose.theta == pytest.approx(math.pi / 2)


def test_step_truth_straight_six_meters():
    speeds = inverse_kinematics(Twist2D(0.3, 0), GEOM)
    start = Pose2D(1, -1, 0.7)
    pose = step_truth(start, speeds, GEOM, 20.0)
    assert pose.x == pytest.approx(1 + 6 * math.cos(0.7))
    assert pose.y == pytest.approx(-1 + 6 * math.sin(0.7))
    assert pose.theta == start.theta


def test_step_truth_quarter_arc_bit_identical():
    geom = VehicleGeometry(0.15, 0.56)
    speeds = inverse_kinematics(Twist2D(1, 1), geom)
    tw = forward_kinematics(speeds, geom)
    assert step_truth(Pose2D(), speeds, geom, math.pi / 2) == exact_arc_step(Pose2D(), tw, math.pi / 2)


def test_step_truth_rejects_zero_dt():
    with pytest.raises(ValueError):
        step_truth(Pose2D(), WheelAngularSpeeds(1, 1), GEOM, 0.0)


# --- sensing ------------------------------------------------------------------------

def test_sense_one_revolution():
    assert sense((2 * math.pi, 2 * math.pi), NoiseModel(), ENC).left_count == 12000


def test_sense_at_rest():
    s = sense((0.0, 0.0), NoiseModel(), ENC)
    assert (s.left_count, s.right_count) == (0, 0)


def test_sense_scale_fault_reads_high():
    noise = NoiseModel(right_scale_error=141 / 137)
    angle = 137 / 60 * 2 * math.pi  # 137 rpm for one second
    s = sense((angle, angle), noise, ENC)
    one_count_rpm = counts_to_rpm(1, 1.0, ENC)
    assert counts_to_rpm(s.right_count, 1.0, ENC) == pytest.approx(141, abs=one_count_rpm)
    assert counts_to_rpm(s.left_count, 1.0, ENC) == pytest.approx(137, abs=one_count_rpm)


def test_sense_floors_toward_negative_infinity():
    s = sense((-1e-9, 1e-9), NoiseModel(), ENC)
    assert (s.left_count, s.right_count) == (-1, 0)


# --- plans ----------------------------------------------------------------------------

def test_square_legs():
    schedule = follow_square(6.0, cruise_speed=0.3)
    straights = [e for e in schedule if e.kind == "straight"]
    assert len(straights) == 4
    assert all(e.duration == pytest.approx(20.0) for e in straights)
    turns = [e for e in schedule if e.kind == "turn"]
    assert len(turns) == 4
    total_turn = sum(forward_kinematics(e.speeds, GEOM).omega * e.duration for e in turns)
    assert total_turn == pytest.approx(2 * math.pi)


def test_square_without_final_turn():
    schedule = follow_square(6.0, final_turn=False)
    assert sum(e.kind == "turn" for e in schedule) == 3


@pytest.mark.parametrize("side", [0.0, -1.0])
def test_degenerate_square_rejected(side):
    with pytest.raises(PlanError):
        follow_square(side)


def test_commanded_square_closes():
    end = fold_exact(follow_square(6.0, align_period=1.0))
    assert abs(end.x) < 1e-12 and abs(end.y) < 1e-12
    assert abs(end.theta) < 1e-12


def test_alignment_pads_to_sample_boundaries():
    schedule = follow_square(6.0, align_period=1.0)
    t = 0.0
    for entry in schedule:
        if entry.kind != "stop":
            assert t == pytest.approx(round(t), abs=1e-9)
        t += entry.duration
    assert t == pytest.approx(round(t), abs=1e-9)
    assert [e.kind for e in schedule[:3]] == ["straight", "turn", "stop"]


def test_infeasible_speed_rejected():
    with pytest.raises(PlanError):
        follow_square(6.0, cruise_speed=5.0)


def test_waypoint_plan_turns_shortest_way():
    plan = WaypointPlan(((0, 0), (1, 0), (1, -1)), cruise_speed=0.2, turn_rate=0.4)
    schedule = plan_schedule(plan, GEOM)
    turn = [e for e in schedule if e.kind == "turn"][0]
    assert forward_kinematics(turn.speeds, GEOM).omega == pytest.approx(-0.4)
    end = fold_exact(schedule)
    assert (end.x, end.y) == pytest.approx((1, -1), abs=1e-12)


def test_waypoint_plan_validation():
    with pytest.raises(PlanError):
        WaypointPlan(((0, 0),))
    with pytest.raises(PlanError):
        WaypointPlan(((0, 0), (1, 1)), cruise_speed=0)


def test_waypoint_times():
    times = waypoint_times(follow_square(6.0, align_period=1.0))
    assert times[0] == 0
    assert times[1] == pytest.approx(20.0)
    assert len(times) == 5


# --- config -------------------------------------------------------------------------------

def test_sample_period_must_be_multiple_of_dt():
    with pytest.raises(ConfigurationError):
        SimConfig(dt=0.03, sample_period=1.0)
    assert SimConfig(dt=0.01, sample_period=1.0).steps_per_sample == 100


@pytest.mark.parametrize("kwargs", [dict(left_scale_error=0), dict(slip_noise_std=-1), dict(seed=-1)])
def test_noise_validation(kwargs):
    with pytest.raises(ConfigurationError):
        NoiseModel(**kwargs)


# --- simulation -----------------------------------------------------------------------------

def test_truth_matches_exact_fold():
    schedule = follow_square(6.0, align_period=1.0)
    truth, _ = simulate(SimConfig(), schedule)
    expected = fold_exact(schedule)
    end = truth.final
    assert end.x == pytest.approx(expected.x, abs=1e-12)
    assert end.y == pytest.approx(expected.y, abs=1e-12)
    assert end.theta == pytest.approx(expected.theta, abs=1e-12)


def test_truth_independent_of_dt():
    schedule = [ScheduleEntry(7.3, inverse_kinematics(Twist2D(0.25, 0.2), GEOM), "arc")]
    a, _ = simulate(SimConfig(dt=0.01), schedule)
    b, _ = simulate(SimConfig(dt=0.5), schedule)
    for (ta, pa), (tb, pb) in zip(a.samples, b.samples):
        assert ta == tb
        assert (pa.x, pa.y, pa.theta) == pytest.approx((pb.x, pb.y, pb.theta), abs=1e-12)


def test_straight_run_within_resolution():
    schedule = [ScheduleEntry(20.0, inverse_kinematics(Twist2D(0.3, 0), GEOM), "straight")]
    truth, log, estimate = run_experiment(SimConfig(), schedule)
    err = math.hypot(estimate.final.x - truth.final.x, estimate.final.y - truth.final.y)
    assert err <= ARC
    assert len(log) == 21 and log[-1].t == 20000


def test_quantization_bound_every_sample():
    schedule = follow_square(6.0, align_period=1.0)
    _, log = simulate(SimConfig(), schedule)
    for sample in log:
        true_l, true_r = true_wheel_angles(schedule, sample.t / 1000)
        est_l = counts_to_distance(sample.left_count, ENC, GEOM.wheel_radius)
        est_r = counts_to_distance(sample.right_count, ENC, GEOM.wheel_radius)
        assert abs(est_l - GEOM.wheel_radius * true_l) <= ARC * (1 + 1e-6)
        assert abs(est_r - GEOM.wheel_radius * true_r) <= ARC * (1 + 1e-6)


def test_noise_free_square_returns_home():
    truth, _, estimate = run_experiment(SimConfig(), follow_square(6.0, align_period=1.0))
    assert math.hypot(estimate.final.x, estimate.final.y) < 0.01
    assert truth.times == estimate.times


def test_seeded_runs_are_identical():
    cfg = SimConfig(noise=NoiseModel(1.01, 0.99, slip_noise_std=0.01, seed=42))
    schedule = follow_square(6.0, align_period=1.0)
    a = run_experiment(cfg, schedule)
    b = run_experiment(cfg, schedule)
    assert a == b
    c = run_experiment(SimConfig(noise=NoiseModel(1.01, 0.99, slip_noise_std=0.01, seed=43)), schedule)
    assert c[1] != a[1]


def test_waypoint_plan_run():
    plan = WaypointPlan(((0, 0), (2, 0), (2, 2)), cruise_speed=0.4, turn_rate=0.5)
    truth, _, estimate = run_experiment(SimConfig(), plan)
    assert (truth.final.x, truth.final.y) == pytest.approx((2, 2), abs=1e-9)
    assert math.hypot(estimate.final.x - 2, estimate.final.y - 2) < 0.01


def test_tachometer_session_and_calibrated_run():
    noise = NoiseModel(left_scale_error=142 / 137, right_scale_error=141 / 137)
    rows = tachometer_session(noise, ENC)
    assert rows[-1][2] == 137
    assert rows[-1][1] == pytest.approx(141, abs=0.01)
    assert rows[-1][0] == pytest.approx(142, abs=0.01)
    profile = fit_profile_from_session(rows, source="bench")
    cfg = SimConfig(noise=noise)
    schedule = follow_square(6.0, align_period=1.0)
    truth, _, raw = run_experiment(cfg, schedule)
    _, _, fixed = run_experiment(cfg, schedule, profile)
    raw_err = math.hypot(raw.final.x - truth.final.x, raw.final.y - truth.final.y)
    fixed_err = math.hypot(fixed.final.x - truth.final.x, fixed.final.y - truth.final.y)
    assert fixed_err * 10 <= raw_err
    assert profile.metadata == {"source": "bench"}
    assert run_experiment(cfg, schedule, CalibrationProfile())[2] == raw
