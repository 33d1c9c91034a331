"""Run configuration: one JSON document fully describing a simulated run."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from odokit.encoder import EncoderConfig, SpeedFilterConfig
from odokit.errors import ConfigurationError, PlanError, SchemaError
from odokit.kinematics import VehicleGeometry
from odokit.simulator import NoiseModel, SimConfig, WaypointPlan

SEED_ENV = "ODOKIT_SEED"

_SECTIONS = {
    "geometry": ("wheel_radius", "track_width"),
    "encoder": ("pulses_per_rev", "quadrature_multiplier", "transmission_ratio", "sample_period"),
    "sim": ("dt", "sample_period"),
    "plan": ("side", "waypoints", "cruise_speed", "turn_rate", "final_turn"),
    "noise": ("left_scale_error", "right_scale_error", "slip_noise_std", "seed"),
    "filter": ("kind", "window", "alpha"),
}
_TOP_LEVEL = tuple(_SECTIONS) + ("calibration_profile", "output_dir")


@dataclass(frozen=True)
class PlanSpec:
    """Either a square of ``side`` meters or an explicit waypoint list."""

    side: float | None = 6.0
    waypoints: tuple[tuple[float, float], ...] | None = None
    cruise_speed: float = 0.3
    turn_rate: float = 0.5
    final_turn: bool = True


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    plan: PlanSpec = field(default_factory=PlanSpec)
    filter: SpeedFilterConfig = field(default_factory=SpeedFilterConfig)
    calibration_profile: str | None = None
    output_dir: str | None = None
    base_dir: Path = Path(".")

    @property
    def geometry(self) -> VehicleGeometry:
        return self.sim.geometry

    @property
    def encoder(self) -> EncoderConfig:
        return self.sim.encoder

    def profile_path(self) -> Path | None:
        if self.calibration_profile is None:
            return None
        return self.base_dir / self.calibration_profile

    def to_dict(self) -> dict[str, Any]:
        g, e, n, s, p, f = self.geometry, self.encoder, self.sim.noise, self.sim, self.plan, self.filter
        plan: dict[str, Any] = {}
        if p.waypoints is not None:
            plan["waypoints"] = [list(w) for w in p.waypoints]
        else:
            plan["side"] = p.side
        plan.update(cruise_speed=p.cruise_speed, turn_rate=p.turn_rate, final_turn=p.final_turn)
        return {
            "geometry": {"wheel_radius": g.wheel_radius, "track_width": g.track_width},
            "encoder": {
                "pulses_per_rev": e.pulses_per_rev,
                "quadrature_multiplier": e.quadrature_multiplier,
                "transmission_ratio": e.transmission_ratio,
                "sample_period": e.sample_period,
            },
            "sim": {"dt": s.dt, "sample_period": s.sample_period},
            "plan": plan,
            "noise": {
                "left_scale_error": n.left_scale_error,
                "right_scale_error": n.right_scale_error,
                "slip_noise_std": n.slip_noise_std,
                "seed": n.seed,
            },
            "filter": {"kind": f.kind, "window": f.window, "alpha": f.alpha},
            "calibration_profile": self.calibration_profile,
            "output_dir": self.output_dir,
        }

    def sha256(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _number(value: Any, where: str, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    if integer and not (isinstance(value, int) or float(value).is_integer()):
        raise SchemaError(f"{where}: expected an integer, got {value!r}")
    return int(value) if integer else float(value)


def _section(data: dict, name: str) -> dict:
    section = data.get(name, {})
    if not isinstance(section, dict):
        raise SchemaError(f"{name}: expected an object")
    unknown = sorted(set(section) - set(_SECTIONS[name]))
    if unknown:
        raise SchemaError(f"{name}: unknown field(s) {', '.join(unknown)}")
    return section


def _build(name: str, cls, kwargs: dict):
    try:
        return cls(**kwargs)
    except (ConfigurationError, PlanError) as exc:
        raise SchemaError(f"{name}: {exc}") from None


def parse_run_config(data: Any, base_dir: Path = Path("."), seed_override: str | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise SchemaError("config: expected a JSON object")
    unknown = sorted(set(data) - set(_TOP_LEVEL))
    if unknown:
        raise SchemaError(f"config: unknown field(s) {', '.join(unknown)}")

    geo = _section(data, "geometry")
    geometry = _build("geometry", VehicleGeometry, {k: _number(v, f"geometry.{k}") for k, v in geo.items()})

    sim = _section(data, "sim")
    sim_kwargs = {k: _number(v, f"sim.{k}") for k, v in sim.items()}
    sample_period = sim_kwargs.get("sample_period", 1.0)

    enc = _section(data, "encoder")
    enc_kwargs: dict[str, Any] = {}
    for k, v in enc.items():
        enc_kwargs[k] = _number(v, f"encoder.{k}", integer=k in ("pulses_per_rev", "quadrature_multiplier"))
    if "sample_period" in enc_kwargs and enc_kwargs["sample_period"] != sample_period:
        raise SchemaError(
            f"encoder.sample_period ({enc_kwargs['sample_period']}) differs from sim.sample_period ({sample_period})"
        )
    enc_kwargs["sample_period"] = sample_period
    encoder = _build("encoder", EncoderConfig, enc_kwargs)

    noi = _section(data, "noise")
    noise_kwargs = {k: _number(v, f"noise.{k}", integer=k == "seed") for k, v in noi.items()}
    if seed_override is not None:
        try:
            noise_kwargs["seed"] = int(seed_override)
        except ValueError:
            raise SchemaError(f"{SEED_ENV}: expected an integer, got {seed_override!r}") from None
    noise = _build("noise", NoiseModel, noise_kwargs)

    sim_cfg = _build("sim", SimConfig, dict(sim_kwargs, geometry=geometry, encoder=encoder, noise=noise))

    pl = _section(data, "plan")
    plan_kwargs: dict[str, Any] = {}
    if "waypoints" in pl and "side" in pl:
        raise SchemaError("plan: give either side or waypoints, not both")
    if "waypoints" in pl:
        wps = pl["waypoints"]
        if not isinstance(wps, list) or not all(isinstance(w, list) and len(w) == 2 for w in wps):
            raise SchemaError("plan.waypoints: expected an array of [x, y] pairs")
        plan_kwargs["waypoints"] = tuple(
            (_number(x, f"plan.waypoints[{i}][0]"), _number(y, f"plan.waypoints[{i}][1]"))
            for i, (x, y) in enumerate(wps)
        )
        plan_kwargs["side"] = None
        _build("plan", WaypointPlan, {"waypoints": plan_kwargs["waypoints"]})
    elif "side" in pl:
        plan_kwargs["side"] = _number(pl["side"], "plan.side")
        if not plan_kwargs["side"] > 0:
            raise SchemaError("plan.side: must be positive")
    for k in ("cruise_speed", "turn_rate"):
        if k in pl:
            plan_kwargs[k] = _number(pl[k], f"plan.{k}")
            if not plan_kwargs[k] > 0:
                raise SchemaError(f"plan.{k}: must be positive")
    if "final_turn" in pl:
        if not isinstance(pl["final_turn"], bool):
            raise SchemaError("plan.final_turn: expected true or false")
        plan_kwargs["final_turn"] = pl["final_turn"]
    plan = PlanSpec(**plan_kwargs)

    fil = _section(data, "filter")
    filt_kwargs: dict[str, Any] = {}
    for k, v in fil.items():
        if k == "kind":
            if not isinstance(v, str):
                raise SchemaError("filter.kind: expected a string")
            filt_kwargs[k] = v
        else:
            filt_kwargs[k] = _number(v, f"filter.{k}", integer=k == "window")
    filt = _build("filter", SpeedFilterConfig, filt_kwargs)

    profile = data.get("calibration_profile")
    if profile is not None and not isinstance(profile, str):
        raise SchemaError("calibration_profile: expected a path string or null")
    out_dir = data.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise SchemaError("output_dir: expected a path string or null")
    cfg = RunConfig(sim_cfg, plan, filt, profile, out_dir, base_dir)
    if profile is not None and not cfg.profile_path().is_file():
        raise SchemaError(f"calibration_profile: file not found: {cfg.profile_path()}")
    return cfg


def load_run_config(path: str | Path, environ=os.environ) -> RunConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_run_config(data, path.parent, environ.get(SEED_ENV))
