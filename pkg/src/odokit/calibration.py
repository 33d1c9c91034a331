"""Encoder calibration: rpm correction against a tachometer, wheel balance
and heading gain, plus the JSON profile that bundles them.

Corrections compose in a fixed order: rpm table, then balance scale, then
kinematics, then heading gain on the per-step heading change.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from odokit.errors import FitError, SchemaError
from odokit.kinematics import WheelAngularSpeeds

RAD_S_PER_RPM = 2.0 * math.pi / 60.0
COMPOSITION_ORDER = ("rpm_correction", "balance", "kinematics", "heading_gain")


@dataclass(frozen=True)
class RpmCalibrationTable:
    """Anchors of (measured_rpm, reference_rpm), strictly increasing in measured."""

    anchors: tuple[tuple[float, float], ...]

    def __post_init__(self):
        anchors = tuple((float(m), float(r)) for m, r in self.anchors)
        object.__setattr__(self, "anchors", anchors)
        if len(anchors) < 2:
            raise FitError("an rpm table needs at least 2 anchors")
        for m, r in anchors:
            if not (math.isfinite(m) and math.isfinite(r)):
                raise FitError("rpm anchors must be finite")
            if m < 0:
                raise FitError(f"measured rpm anchors must be non-negative, got {m}")
            if m > 0 and r <= 0:
                raise FitError(f"reference rpm must be positive where measured rpm is ({m}, {r})")
        for (m0, _), (m1, _) in zip(anchors, anchors[1:]):
            if not m1 > m0:
                raise FitError("measured rpm anchors must be strictly increasing")

    @property
    def measured(self) -> list[float]:
        return [m for m, _ in self.anchors]

    def to_list(self) -> list[list[float]]:
        return [[m, r] for m, r in self.anchors]


@dataclass(frozen=True)
class WheelBalanceFactors:
    left_scale: float = 1.0
    right_scale: float = 1.0

    def __post_init__(self):
        for name in ("left_scale", "right_scale"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise FitError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class HeadingGain:
    gain: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.gain) and self.gain > 0):
            raise FitError(f"heading gain must be positive, got {self.gain!r}")


def fit_rpm_correction(pairs: Iterable[tuple[float, float]]) -> RpmCalibrationTable:
    """Build a correction table from (encoder_rpm, tachometer_rpm) pairs."""
    pairs = sorted((float(e), float(t)) for e, t in pairs)
    if len(pairs) < 2:
        raise FitError(f"rpm fit needs at least 2 pairs, got {len(pairs)}")
    for (e0, _), (e1, _) in zip(pairs, pairs[1:]):
        if e0 == e1:
            raise FitError(f"duplicate encoder rpm {e0} in calibration pairs")
    return RpmCalibrationTable(tuple(pairs))


def apply_rpm_correction(table: RpmCalibrationTable, raw_rpm: float) -> float:
    """Map a raw encoder rpm to tachometer rpm.

    Piecewise-linear between anchors, linear extrapolation from the end
    segments. The map acts on |rpm| and restores the sign; a stopped wheel
    stays at zero even when the table is not anchored there.
    """
    if raw_rpm == 0:
        return 0.0
    x = abs(raw_rpm)
    anchors = table.anchors
    measured = table.measured
    i = bisect.bisect_right(measured, x)
    if i == 0:
        (m0, r0), (m1, r1) = anchors[0], anchors[1]
        base_m, base_r = m0, r0
    elif i == len(anchors):
        (m0, r0), (m1, r1) = anchors[-2], anchors[-1]
        base_m, base_r = m1, r1
    else:
        (m0, r0), (m1, r1) = anchors[i - 1], anchors[i]
        base_m, base_r = m0, r0
    corrected = base_r + (x - base_m) * (r1 - r0) / (m1 - m0)
    return math.copysign(corrected, raw_rpm)


def fit_wheel_balance(paired_speeds: Sequence[tuple[float, float]]) -> WheelBalanceFactors:
    """Scale both wheels onto their common mean from straight-driving data."""
    if len(paired_speeds) < 1:
        raise FitError("balance fit needs at least one (left, right) pair")
    values = [float(v) for pair in paired_speeds for v in pair]
    if any(v == 0 or not math.isfinite(v) for v in values):
        raise FitError("balance fit needs finite, nonzero wheel speeds")
    if len({math.copysign(1.0, v) for v in values}) != 1:
        raise FitError("balance fit needs all wheel speeds of the same sign")
    n = len(paired_speeds)
    mean_left = math.fsum(l for l, _ in paired_speeds) / n
    mean_right = math.fsum(r for _, r in paired_speeds) / n
    midpoint = math.fsum((l + r) / 2.0 for l, r in paired_speeds) / n
    return WheelBalanceFactors(midpoint / mean_left, midpoint / mean_right)


def fit_heading_gain(raw_estimates: Sequence[float], actual: float) -> HeadingGain:
    """Proportional gain that maps the mean raw heading estimate onto ``actual``."""
    if len(raw_estimates) == 0:
        raise FitError("heading fit needs at least one raw estimate")
    if actual == 0:
        raise FitError("actual heading must be nonzero")
    mean = math.fsum(raw_estimates) / len(raw_estimates)
    if mean == 0:
        raise FitError("mean raw heading estimate is zero")
    gain = actual / mean
    if gain <= 0:
        raise FitError(f"raw estimates and actual heading disagree in sign (gain {gain})")
    return HeadingGain(gain)


@dataclass(frozen=True)
class CalibrationProfile:
    rpm_table_left: RpmCalibrationTable | None = None
    rpm_table_right: RpmCalibrationTable | None = None
    balance: WheelBalanceFactors = WheelBalanceFactors()
    heading: HeadingGain = HeadingGain()
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def heading_gain(self) -> float:
        return self.heading.gain

    @property
    def is_identity(self) -> bool:
        return (
            self.rpm_table_left is None
            and self.rpm_table_right is None
            and self.balance == WheelBalanceFactors()
            and self.heading.gain == 1.0
        )

    def correct_wheel(self, rad_s: float, side: str) -> float:
        table = self.rpm_table_left if side == "left" else self.rpm_table_right
        scale = self.balance.left_scale if side == "left" else self.balance.right_scale
        if table is not None:
            rad_s = apply_rpm_correction(table, rad_s / RAD_S_PER_RPM) * RAD_S_PER_RPM
        return rad_s * scale

    def correct_speeds(self, speeds: WheelAngularSpeeds) -> WheelAngularSpeeds:
        return WheelAngularSpeeds(
            self.correct_wheel(speeds.left, "left"),
            self.correct_wheel(speeds.right, "right"),
        )


def apply_profile(
    profile: CalibrationProfile, raw: Iterable[tuple[float, WheelAngularSpeeds]]
) -> list[tuple[float, WheelAngularSpeeds]]:
    """Correct a (t, wheel speeds) stream. Heading gain is applied later, at integration."""
    if profile.is_identity:
        return list(raw)
    return [(t, profile.correct_speeds(s)) for t, s in raw]


# --- profile files ---------------------------------------------------------

PROFILE_FIELDS = ("rpm_table_left", "rpm_table_right", "balance", "heading_gain", "metadata")
_BALANCE_FIELDS = ("left_scale", "right_scale")


def profile_to_dict(profile: CalibrationProfile) -> dict:
    def table(t):
        return [] if t is None else t.to_list()

    return {
        "rpm_table_left": table(profile.rpm_table_left),
        "rpm_table_right": table(profile.rpm_table_right),
        "balance": {
            "left_scale": profile.balance.left_scale,
            "right_scale": profile.balance.right_scale,
        },
        "heading_gain": profile.heading.gain,
        "metadata": dict(profile.metadata),
    }


def _table_from_json(value, name: str) -> RpmCalibrationTable | None:
    if not isinstance(value, list):
        raise SchemaError(f"{name}: expected an array of [measured, reference] pairs")
    if not value:
        return None
    for i, pair in enumerate(value):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
        ):
            raise SchemaError(f"{name}[{i}]: expected [measured, reference] numbers")
    try:
        return RpmCalibrationTable(tuple((m, r) for m, r in value))
    except FitError as exc:
        raise SchemaError(f"{name}: {exc}") from None


def profile_from_dict(data) -> CalibrationProfile:
    if not isinstance(data, dict):
        raise SchemaError("calibration profile must be a JSON object")
    unknown = sorted(set(data) - set(PROFILE_FIELDS))
    if unknown:
        raise SchemaError(f"unknown calibration profile field(s): {', '.join(unknown)}")
    balance = data.get("balance", {})
    if not isinstance(balance, dict):
        raise SchemaError("balance: expected an object")
    unknown = sorted(set(balance) - set(_BALANCE_FIELDS))
    if unknown:
        raise SchemaError(f"unknown balance field(s): {', '.join(unknown)}")
    metadata = data.get("metadata", {})
    if not isinstance(metadata, dict) or not all(isinstance(v, str) for v in metadata.values()):
        raise SchemaError("metadata: expected an object of strings")
    try:
        return CalibrationProfile(
            rpm_table_left=_table_from_json(data.get("rpm_table_left", []), "rpm_table_left"),
            rpm_table_right=_table_from_json(data.get("rpm_table_right", []), "rpm_table_right"),
            balance=WheelBalanceFactors(
                float(balance.get("left_scale", 1.0)), float(balance.get("right_scale", 1.0))
            ),
            heading=HeadingGain(float(data.get("heading_gain", 1.0))),
            metadata=dict(metadata),
        )
    except (FitError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid calibration profile: {exc}") from None


def load_profile(path: str | Path) -> CalibrationProfile:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return profile_from_dict(data)


def save_profile(profile: CalibrationProfile, path: str | Path) -> None:
    """Write the profile atomically: a temp file in the target directory, then rename."""
    path = Path(path)
    text = json.dumps(profile_to_dict(profile), indent=2) + "\n"
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- calibration session CSVs ----------------------------------------------

RPM_COLUMNS = ("encoder_rpm_left", "encoder_rpm_right", "tachometer_rpm")
BALANCE_COLUMNS = ("left_rad_s", "right_rad_s")
HEADING_COLUMNS = ("raw_deg",)


def read_columns(path: str | Path, required: Sequence[str]) -> dict[str, list[float]]:
    """Read named float columns from a CSV session file.

    Raises SchemaError naming the first missing column, any non-numeric
    cell, or an empty table.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        reader.fieldnames = header
        columns: dict[str, list[float]] = {c: [] for c in required}
        for row in reader:
            for col in required:
                cell = (row.get(col) or "").strip()
                try:
                    columns[col].append(float(cell))
                except ValueError:
                    raise SchemaError(
                        f"{path}: line {reader.line_num}: column {col!r} is not a number: {cell!r}"
                    ) from None
    if not columns[required[0]]:
        raise SchemaError(f"{path}: no data rows")
    return columns
