import json
import math
import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from odokit.calibration import (
    RAD_S_PER_RPM,
    CalibrationProfile,
    HeadingGain,
    RpmCalibrationTable,
    WheelBalanceFactors,
    apply_profile,
    apply_rpm_correction,
    fit_heading_gain,
    fit_rpm_correction,
    fit_wheel_balance,
    load_profile,
    profile_from_dict,
    profile_to_dict,
    read_columns,
    save_profile,
)
from odokit.errors import FitError, SchemaError
from odokit.kinematics import WheelAngularSpeeds

# tachometer reference and right/left encoder readings, rpm
TACHO = [33, 53, 72, 92, 114, 137]
RIGHT = [33, 54, 74, 94, 118, 141]
LEFT = [33, 55, 75, 95, 118, 142]
# right/left wheel speeds in rad/s while driving straight (decimal commas read as points)
T2_RIGHT = [0.15, 0.66, 1.33, 1.52, 1.63, 1.81]
T2_LEFT = [0.15, 0.64, 1.34, 1.57, 1.66, 1.71]
HEADING_TRIALS = [20, 22, 30, 32, 36]


@pytest.fixture
def right_table():
    return fit_rpm_correction(zip(RIGHT, TACHO))


def test_table_one_anchor_exactness(right_table):
    assert apply_rpm_correction(right_table, 141) == 137
    assert apply_rpm_correction(right_table, 33) == 33
    for measured, ref in zip(RIGHT, TACHO):
        assert apply_rpm_correction(right_table, measured) == ref


def test_interpolation_between_anchors(right_table):
    # hand interpolation: 72 + (87.5 - 74) / (94 - 74) * (92 - 72)
    assert apply_rpm_correction(right_table, 87.5) == pytest.approx(85.5)


def test_sign_symmetry(right_table):
    assert apply_rpm_correction(right_table, -141) == -137


def test_identity_table():
    table = RpmCalibrationTable(((0, 0), (100, 100)))
    assert apply_rpm_correction(table, 57.3) == pytest.approx(57.3)
    assert apply_rpm_correction(table, 0) == 0


def test_extrapolation_is_linear(right_table):
    # beyond the last anchor the (118, 114) -> (141, 137) segment continues
    assert apply_rpm_correction(right_table, 164) == pytest.approx(160)


def test_fit_sorts_and_rejects_duplicates():
    table = fit_rpm_correction([(94, 92), (33, 33), (54, 53)])
    assert table.measured == [33, 54, 94]
    with pytest.raises(FitError):
        fit_rpm_correction([(33, 33), (33, 34)])
    with pytest.raises(FitError):
        fit_rpm_correction([(33, 33)])


@given(st.floats(0, 200))
def test_correction_monotone(x):
    right_table = fit_rpm_correction(zip(RIGHT, TACHO))
    assert apply_rpm_correction(right_table, x) <= apply_rpm_correction(right_table, x + 0.5)


@given(st.floats(-300, 300))
def test_correction_odd(x):
    table = fit_rpm_correction(zip(LEFT, TACHO))
    assert apply_rpm_correction(table, -x) == -apply_rpm_correction(table, x)


# --- balance --------------------------------------------------------------------------

def test_table_two_balance():
    factors = fit_wheel_balance(list(zip(T2_LEFT, T2_RIGHT)))
    mean_left, mean_right = statistics.fmean(T2_LEFT), statistics.fmean(T2_RIGHT)
    assert mean_left == pytest.approx(1.178, abs=1e-3)
    assert mean_right == pytest.approx(1.183, abs=1e-3)
    assert 0.99 <= factors.left_scale <= 1.01 and 0.99 <= factors.right_scale <= 1.01
    assert factors.right_scale < factors.left_scale
    corrected_left = statistics.fmean(v * factors.left_scale for v in T2_LEFT)
    corrected_right = statistics.fmean(v * factors.right_scale for v in T2_RIGHT)
    assert abs(corrected_left - corrected_right) < 1e-12


def test_balance_identical_columns():
    assert fit_wheel_balance([(1.2, 1.2), (0.8, 0.8)]) == WheelBalanceFactors(1.0, 1.0)


def test_balance_single_pair():
    factors = fit_wheel_balance([(1.0, 1.1)])
    assert factors.left_scale == pytest.approx(1.05)
    assert factors.right_scale == pytest.approx(1.05 / 1.1)
    assert factors.right_scale == pytest.approx(0.9545, abs=1e-4)


@pytest.mark.parametrize("pairs", [[], [(1.0, 0.0)], [(1.0, -1.0)], [(1.0, 1.0), (-1.0, -1.0)]])
def test_balance_rejects_bad_data(pairs):
    with pytest.raises(FitError):
        fit_wheel_balance(pairs)


@given(st.lists(st.tuples(st.floats(0.05, 5), st.floats(0.05, 5)), min_size=1, max_size=30))
def test_balance_equalises_means(pairs):
    f = fit_wheel_balance(pairs)
    left = math.fsum(l * f.left_scale for l, _ in pairs) / len(pairs)
    right = math.fsum(r * f.right_scale for _, r in pairs) / len(pairs)
    assert abs(left - right) < 1e-12 * max(1.0, abs(left))


# --- heading gain -----------------------------------------------------------------------

def test_heading_gain_from_trials():
    gain = fit_heading_gain(HEADING_TRIALS, 90).gain
    assert gain == pytest.approx(90 / 28)
    assert gain == pytest.approx(3.214, abs=1e-3)
    assert gain == pytest.approx(3.2, abs=0.05)


@pytest.mark.parametrize("raw, expected", [([90], 1.0), ([45, 45], 2.0)])
def test_heading_gain_examples(raw, expected):
    assert fit_heading_gain(raw, 90).gain == pytest.approx(expected)


@pytest.mark.parametrize("raw, actual", [([], 90), ([10, -10], 90), ([10], 0), ([-10], 90)])
def test_heading_gain_errors(raw, actual):
    with pytest.raises(FitError):
        fit_heading_gain(raw, actual)


def test_heading_gain_recovers_underreporting_estimator():
    rng = np.random.default_rng(11)
    true_gain, actual, noise = 3.2, 90.0, 2.0
    recovered = []
    for _ in range(200):
        trials = actual / true_gain + rng.normal(0, noise, size=5)
        recovered.append(fit_heading_gain(list(trials), actual).gain)
    # delta-method standard error of actual / mean(5 trials)
    se = true_gain**2 * noise / (actual * math.sqrt(5))
    assert abs(np.mean(recovered) - true_gain) < 3 * se / math.sqrt(200) + 0.01
    within = np.mean(np.abs(np.array(recovered) - true_gain) < 2 * se)
    assert within > 0.9


# --- scale-error recovery ----------------------------------------------------------------

def test_scale_error_recovery_over_fit_range():
    right_fault, left_fault = 141 / 137, 142 / 137
    refs = np.linspace(20, 140, 7)
    right = fit_rpm_correction((r * right_fault, r) for r in refs)
    left = fit_rpm_correction((r * left_fault, r) for r in refs)
    for truth in np.linspace(20, 140, 61):
        assert abs(apply_rpm_correction(right, truth * right_fault) - truth) < 0.5
        assert abs(apply_rpm_correction(left, truth * left_fault) - truth) < 0.5


# --- profile -------------------------------------------------------------------------------

def test_identity_profile_is_default_and_bitwise_transparent():
    profile = CalibrationProfile()
    assert profile.is_identity
    stream = [(0.5 * i, WheelAngularSpeeds(0.1 * i, -0.3 * i + 0.07)) for i in range(10)]
    assert apply_profile(profile, stream) == stream
    non_trivial = CalibrationProfile(heading=HeadingGain(2.0))
    assert [s for _, s in apply_profile(non_trivial, stream)] == [s for _, s in stream]


def test_profile_corrects_right_wheel(right_table):
    profile = CalibrationProfile(rpm_table_right=right_table)
    out = apply_profile(profile, [(0.0, WheelAngularSpeeds(1.0, 141 * RAD_S_PER_RPM))])
    assert out[0][1].right / RAD_S_PER_RPM == pytest.approx(137)
    assert out[0][1].left == 1.0


def test_profile_order_rpm_then_balance(right_table):
    profile = CalibrationProfile(rpm_table_right=right_table, balance=WheelBalanceFactors(1.0, 0.5))
    out = profile.correct_speeds(WheelAngularSpeeds(0.0, 141 * RAD_S_PER_RPM))
    assert out.right / RAD_S_PER_RPM == pytest.approx(137 * 0.5)


def test_profile_json_round_trip(tmp_path, right_table):
    profile = CalibrationProfile(
        rpm_table_left=fit_rpm_correction(zip(LEFT, TACHO)),
        rpm_table_right=right_table,
        balance=WheelBalanceFactors(1.002, 0.998),
        heading=HeadingGain(3.2),
        metadata={"source": "bench"},
    )
    path = tmp_path / "profile.json"
    save_profile(profile, path)
    data = json.loads(path.read_text())
    assert list(data) == ["rpm_table_left", "rpm_table_right", "balance", "heading_gain", "metadata"]
    assert data["rpm_table_right"][-1] == [141.0, 137.0]
    assert load_profile(path) == profile
    assert list(tmp_path.iterdir()) == [path]


@pytest.mark.parametrize(
    "data",
    [
        {"heading_gain": 1.0, "extra": 1},
        {"balance": {"left_scale": 1.0, "middle_scale": 1.0}},
        {"rpm_table_left": [[1, 2]]},
        {"rpm_table_left": [[2, 2], [1, 1]]},
        {"heading_gain": -1.0},
        {"metadata": {"a": 1}},
        [],
    ],
)
def test_profile_rejects_invalid(data):
    with pytest.raises(SchemaError):
        profile_from_dict(data)


def test_empty_tables_mean_identity():
    profile = profile_from_dict({"rpm_table_left": [], "rpm_table_right": []})
    assert profile.is_identity
    assert profile_to_dict(profile)["rpm_table_left"] == []


def test_read_columns_names_missing_column(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("left_rad_s,speed\n1,2\n")
    with pytest.raises(SchemaError, match="right_rad_s"):
        read_columns(path, ("left_rad_s", "right_rad_s"))


def test_read_columns_empty(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("raw_deg\n")
    with pytest.raises(SchemaError, match="no data"):
        read_columns(path, ("raw_deg",))
