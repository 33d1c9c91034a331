"""Quadrature decoding and tick-stream to wheel-speed conversion.

Distances are carried in fixed point: one count maps to a per-count unit
rounded to ``UNIT_BITS`` significant bits, so ``k * unit`` and any sum of
such products are exact floats while cumulative counts stay below 2**24.
That keeps per-interval displacements lossless under summation.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from odokit.errors import ConfigurationError, SchemaError, StreamError
from odokit.kinematics import VehicleGeometry, WheelAngularSpeeds, WheelDisplacements

UNIT_BITS = 29
LOG_HEADER = ("t_ms", "left_count", "right_count")

# Gray order of (A, B) for forward rotation: 00 -> 10 -> 11 -> 01
_GRAY_INDEX = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}
_GRAY_STATES = [(0, 0), (1, 0), (1, 1), (0, 1)]


def fixed_point_unit(value: float, bits: int = UNIT_BITS) -> float:
    """Round ``value`` to ``bits`` significant binary digits."""
    mantissa, exponent = math.frexp(value)
    return math.ldexp(round(math.ldexp(mantissa, bits)), exponent - bits)


@dataclass(frozen=True)
class EncoderConfig:
    pulses_per_rev: int = 600
    quadrature_multiplier: int = 4
    transmission_ratio: float = 5.0  # encoder revolutions per wheel revolution (20:100 teeth)
    sample_period: float = 1.0

    def __post_init__(self):
        if self.pulses_per_rev <= 0:
            raise ConfigurationError("pulses_per_rev must be positive")
        if self.quadrature_multiplier not in (1, 2, 4):
            raise ConfigurationError("quadrature_multiplier must be 1, 2 or 4")
        if not (math.isfinite(self.transmission_ratio) and self.transmission_ratio > 0):
            raise ConfigurationError("transmission_ratio must be positive")
        if not (math.isfinite(self.sample_period) and self.sample_period > 0):
            raise ConfigurationError("sample_period must be positive")

    @property
    def counts_per_wheel_rev(self) -> float:
        return self.pulses_per_rev * self.quadrature_multiplier * self.transmission_ratio

    @property
    def angle_per_count(self) -> float:
        return fixed_point_unit(2.0 * math.pi / self.counts_per_wheel_rev)

    def arc_per_count(self, wheel_radius: float) -> float:
        """Ground distance of one count for a wheel of the given radius."""
        return fixed_point_unit(2.0 * math.pi * wheel_radius / self.counts_per_wheel_rev)


@dataclass(frozen=True)
class EncoderSample:
    t: int  # milliseconds since stream start
    left_count: int
    right_count: int


@dataclass(frozen=True)
class QuadratureState:
    phase_a: int = 0
    phase_b: int = 0
    count: int = 0
    glitches: int = 0


def decode_quadrature(state: QuadratureState, new_a: int, new_b: int) -> tuple[QuadratureState, int]:
    """Apply one A/B sample to ``state`` with x4 decoding.

    Returns the new state and the count delta. A jump across two Gray
    states cannot be attributed to a direction; it is recorded as a glitch
    and leaves the count untouched.
    """
    if new_a not in (0, 1) or new_b not in (0, 1):
        raise ValueError(f"phase bits must be 0 or 1, got {(new_a, new_b)}")
    old = _GRAY_INDEX[(state.phase_a, state.phase_b)]
    new = _GRAY_INDEX[(new_a, new_b)]
    step = (new - old) % 4
    if step == 0:
        return state, 0
    if step == 2:
        return QuadratureState(new_a, new_b, state.count, state.glitches + 1), 0
    delta = 1 if step == 1 else -1
    return QuadratureState(new_a, new_b, state.count + delta, state.glitches), delta


def quadrature_waveform(cycles: int, reverse: bool = False) -> list[tuple[int, int]]:
    """A/B samples for ``cycles`` full electrical cycles, starting and ending at 00."""
    order = _GRAY_STATES[::-1] if reverse else _GRAY_STATES
    if reverse:
        order = [order[-1]] + order[:-1]  # still start at 00
    seq = [order[i % 4] for i in range(4 * cycles)]
    seq.append((0, 0))
    return seq


def decode_waveform(samples: Iterable[tuple[int, int]], state: QuadratureState | None = None) -> QuadratureState:
    state = state or QuadratureState()
    for a, b in samples:
        state, _ = decode_quadrature(state, a, b)
    return state


def counts_to_wheel_angle(delta_counts: int, cfg: EncoderConfig) -> float:
    """Wheel rotation in radians for a count delta."""
    return delta_counts * cfg.angle_per_count


def counts_to_distance(delta_counts: int, cfg: EncoderConfig, wheel_radius: float) -> float:
    return delta_counts * cfg.arc_per_count(wheel_radius)


def counts_to_rpm(delta_counts: int, dt: float, cfg: EncoderConfig) -> float:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    return delta_counts * 60.0 / (cfg.counts_per_wheel_rev * dt)


# --- speed smoothing -------------------------------------------------------

FILTER_KINDS = ("none", "moving_average", "exponential")


@dataclass(frozen=True)
class SpeedFilterConfig:
    kind: str = "moving_average"
    window: int = 3
    alpha: float = 0.5

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ConfigurationError(f"filter kind must be one of {FILTER_KINDS}, got {self.kind!r}")
        if not (isinstance(self.window, int) and self.window >= 1):
            raise ConfigurationError("filter window must be an integer >= 1")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigurationError("filter alpha must lie in (0, 1]")


class IdentityFilter:
    def update(self, value: float) -> float:
        return value


class MovingAverageFilter:
    """Mean of the last ``window`` values (fewer during warm-up)."""

    def __init__(self, window: int):
        self._buf: deque[float] = deque(maxlen=window)

    def update(self, value: float) -> float:
        self._buf.append(value)
        ref = self._buf[0]
        # averaging offsets from a member keeps a constant signal bit-exact
        return ref + math.fsum(v - ref for v in self._buf) / len(self._buf)


class ExponentialFilter:
    def __init__(self, alpha: float):
        self.alpha = alpha
        self._state: float | None = None

    def update(self, value: float) -> float:
        if self._state is None:
            self._state = value
        else:
            self._state = self._state + self.alpha * (value - self._state)
        return self._state


def make_speed_filter(cfg: SpeedFilterConfig):
    if cfg.kind == "none":
        return IdentityFilter()
    if cfg.kind == "moving_average":
        return MovingAverageFilter(cfg.window)
    return ExponentialFilter(cfg.alpha)


# --- stream conversion -----------------------------------------------------

@dataclass(frozen=True)
class WheelInterval:
    """Odometry readings for the interval ending at ``t`` seconds."""

    t: float
    dt: float
    delta_counts: tuple[int, int]
    raw_speeds: WheelAngularSpeeds
    speeds: WheelAngularSpeeds
    angles: tuple[float, float]
    displacements: WheelDisplacements


def check_stream(stream: Sequence[EncoderSample]) -> None:
    if len(stream) < 2:
        raise StreamError("an encoder stream needs at least 2 samples", index=len(stream))
    for i in range(1, len(stream)):
        if stream[i].t <= stream[i - 1].t:
            raise StreamError(
                f"timestamps must be strictly increasing: sample {i} has t={stream[i].t} ms "
                f"after t={stream[i - 1].t} ms",
                index=i,
            )


def samples_to_speeds(
    stream: Sequence[EncoderSample],
    cfg: EncoderConfig,
    filt: SpeedFilterConfig | None = None,
    geom: VehicleGeometry | None = None,
) -> list[WheelInterval]:
    """Difference consecutive samples into wheel speeds and displacements.

    Smoothing is applied to the reported speeds only. Displacements come
    straight from count deltas so their sums stay lossless.
    """
    check_stream(stream)
    filt = filt or SpeedFilterConfig()
    geom = geom or VehicleGeometry()
    arc = cfg.arc_per_count(geom.wheel_radius)
    left_filter, right_filter = make_speed_filter(filt), make_speed_filter(filt)

    out = []
    for prev, cur in zip(stream, stream[1:]):
        dt = (cur.t - prev.t) / 1000.0
        dl = cur.left_count - prev.left_count
        dr = cur.right_count - prev.right_count
        angle_l = counts_to_wheel_angle(dl, cfg)
        angle_r = counts_to_wheel_angle(dr, cfg)
        raw = WheelAngularSpeeds(angle_l / dt, angle_r / dt)
        smoothed = WheelAngularSpeeds(left_filter.update(raw.left), right_filter.update(raw.right))
        out.append(
            WheelInterval(
                t=cur.t / 1000.0,
                dt=dt,
                delta_counts=(dl, dr),
                raw_speeds=raw,
                speeds=smoothed,
                angles=(angle_l, angle_r),
                displacements=WheelDisplacements(dl * arc, dr * arc),
            )
        )
    return out


# --- log files -------------------------------------------------------------

def write_encoder_log(samples: Iterable[EncoderSample], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_HEADER)
        for s in samples:
            writer.writerow((s.t, s.left_count, s.right_count))


def _parse_int(text: str, column: str, line: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise SchemaError(f"line {line}: column {column!r} is not an integer: {text!r}") from None


def read_encoder_log(path: str | Path) -> list[EncoderSample]:
    """Read an encoder log CSV. Malformed rows raise with their line number."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LOG_HEADER:
            raise SchemaError(f"line 1: expected header {','.join(LOG_HEADER)!r}, got {header!r}")
        samples = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise SchemaError(f"line {line}: expected 3 fields, got {len(row)}")
            t, left, right = (_parse_int(v, c, line) for v, c in zip(row, LOG_HEADER))
            if t < 0:
                raise SchemaError(f"line {line}: t_ms must be non-negative")
            samples.append(EncoderSample(t, left, right))
    return samples
