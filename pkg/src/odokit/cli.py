"""odokit command line: simulate, calibrate, replay, evaluate, plot.

Exit codes: 0 success, 2 usage error, 3 input-schema error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from odokit import __version__
from odokit.calibration import (
    BALANCE_COLUMNS,
    COMPOSITION_ORDER,
    HEADING_COLUMNS,
    RPM_COLUMNS,
    CalibrationProfile,
    fit_heading_gain,
    fit_rpm_correction,
    fit_wheel_balance,
    load_profile,
    read_columns,
    save_profile,
)
from odokit.config import SEED_ENV, RunConfig, load_run_config
from odokit.encoder import read_encoder_log, write_encoder_log
from odokit.errors import OdometryError
from odokit.evaluation import evaluate, format_endpoint, render_paths, write_report
from odokit.kinematics import Pose2D, VehicleGeometry
from odokit.odometry import estimate_trajectory
from odokit.simulator import WaypointPlan, follow_square, plan_schedule, run_experiment, waypoint_times
from odokit.trajectory import read_trajectory, write_trajectory

log = logging.getLogger("odokit")

EXIT_OK, EXIT_USAGE, EXIT_SCHEMA, EXIT_IO = 0, 2, 3, 4

ARTIFACTS = {
    "truth": "truth.csv",
    "log": "encoder_log.csv",
    "estimate": "estimate.csv",
    "report": "report.json",
    "plot": "paths.svg",
}
MANIFEST = "manifest.json"


def bundled(name: str) -> Path:
    """Path of a data file shipped with the package (configs and calibration fixtures)."""
    return Path(str(resources.files("odokit") / "data" / name))


def resolve_input(name: str) -> Path:
    """A user path, falling back to the bundled data file of the same name."""
    path = Path(name)
    if not path.exists() and path.parent == Path(".") and bundled(name).is_file():
        return bundled(name)
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def build_schedule(cfg: RunConfig):
    p = cfg.plan
    if p.waypoints is not None:
        plan = WaypointPlan(p.waypoints, p.cruise_speed, p.turn_rate)
        return plan_schedule(plan, cfg.geometry, align_period=cfg.sim.sample_period)
    return follow_square(
        p.side,
        p.cruise_speed,
        p.turn_rate,
        cfg.geometry,
        final_turn=p.final_turn,
        align_period=cfg.sim.sample_period,
    )


def _profile_or_identity(path) -> CalibrationProfile:
    return load_profile(path) if path is not None else CalibrationProfile()


def cmd_simulate(args) -> int:
    cfg = load_run_config(resolve_input(args.config))
    out = Path(args.out or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    profile = _profile_or_identity(cfg.profile_path())
    schedule = build_schedule(cfg)
    log.info("simulating %d schedule entries, seed %d", len(schedule), cfg.sim.noise.seed)
    truth, enc_log, estimate = run_experiment(cfg.sim, schedule, profile, cfg.filter)

    paths = {k: out / v for k, v in ARTIFACTS.items()}
    write_trajectory(truth, paths["truth"])
    write_encoder_log(enc_log, paths["log"])
    write_trajectory(estimate, paths["estimate"])
    report = evaluate(estimate, truth, waypoint_times(schedule))
    write_report(report, paths["report"])
    render_paths(estimate, truth, paths["plot"])

    manifest = {
        "tool": "odokit",
        "version": __version__,
        "config_sha256": cfg.sha256(),
        "seed": cfg.sim.noise.seed,
        "seed_source": SEED_ENV if SEED_ENV in os.environ else "config",
        "config": cfg.to_dict(),
        "calibration_profile_sha256": _sha256(cfg.profile_path()) if cfg.profile_path() else None,
        "composition_order": list(COMPOSITION_ORDER),
        "artifacts": {v: _sha256(paths[k]) for k, v in ARTIFACTS.items()},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(format_endpoint(report.endpoint_error_x, report.endpoint_error_y, report.endpoint_error_norm))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    profile_path = Path(args.profile)
    profile = load_profile(profile_path) if profile_path.exists() else CalibrationProfile()
    metadata = dict(profile.metadata)
    source = Path(args.input).name

    if args.kind == "rpm":
        cols = read_columns(resolve_input(args.input), RPM_COLUMNS)
        tach = cols["tachometer_rpm"]
        left = fit_rpm_correction(zip(cols["encoder_rpm_left"], tach))
        right = fit_rpm_correction(zip(cols["encoder_rpm_right"], tach))
        metadata["rpm"] = f"fit from {source} ({len(tach)} tachometer pairs)"
        profile = replace(profile, rpm_table_left=left, rpm_table_right=right, metadata=metadata)
    elif args.kind == "balance":
        cols = read_columns(resolve_input(args.input), BALANCE_COLUMNS)
        balance = fit_wheel_balance(list(zip(cols["left_rad_s"], cols["right_rad_s"])))
        metadata["balance"] = f"fit from {source} ({len(cols['left_rad_s'])} straight-driving pairs)"
        profile = replace(profile, balance=balance, metadata=metadata)
    else:
        cols = read_columns(resolve_input(args.input), HEADING_COLUMNS)
        heading = fit_heading_gain(cols["raw_deg"], args.actual_deg)
        metadata["heading"] = f"fit from {source} ({len(cols['raw_deg'])} trials, actual {args.actual_deg:g} deg)"
        profile = replace(profile, heading=heading, metadata=metadata)

    log.info("writing %s", profile_path)
    save_profile(profile, profile_path)
    print(f"updated {args.kind} calibration in {profile_path}")
    return EXIT_OK


def cmd_replay(args) -> int:
    if args.config:
        cfg = load_run_config(resolve_input(args.config))
    else:
        cfg = RunConfig()
    geometry = cfg.geometry
    if args.wheel_radius is not None or args.track_width is not None:
        geometry = VehicleGeometry(
            args.wheel_radius if args.wheel_radius is not None else geometry.wheel_radius,
            args.track_width if args.track_width is not None else geometry.track_width,
        )
    profile_path = args.profile or cfg.profile_path()
    profile = _profile_or_identity(profile_path)
    start = Pose2D(*args.start) if args.start else None
    enc_log = read_encoder_log(args.log)
    estimate = estimate_trajectory(enc_log, geometry, cfg.encoder, profile, start, cfg.filter)
    write_trajectory(estimate, args.out)
    return EXIT_OK


def _parse_times(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid waypoint times {text!r}") from None


def cmd_evaluate(args) -> int:
    estimate, truth = read_trajectory(resolve_input(args.estimate)), read_trajectory(resolve_input(args.truth))
    report = evaluate(estimate, truth, args.waypoint_times)
    if args.out:
        write_report(report, args.out)
    print(format_endpoint(report.endpoint_error_x, report.endpoint_error_y, report.endpoint_error_norm))
    return EXIT_OK


def cmd_plot(args) -> int:
    estimate, truth = read_trajectory(resolve_input(args.estimate)), read_trajectory(resolve_input(args.truth))
    render_paths(estimate, truth, args.out, title=args.title)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odokit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"odokit {__version__}")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a run and write truth, log, estimate, report and plot")
    p.add_argument("--config", required=True, help="run config JSON (see bundled square6.json)")
    p.add_argument("--out", help="output directory (default: config output_dir or .)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="fit one calibration stage into a profile")
    p.add_argument("--kind", required=True, choices=("rpm", "balance", "heading"))
    p.add_argument("--input", required=True, help="calibration session CSV")
    p.add_argument("--profile", required=True, help="profile JSON to update (created if missing)")
    p.add_argument("--actual-deg", type=float, help="true turn angle, required for --kind heading")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("replay", help="dead-reckon an encoder log")
    p.add_argument("--log", required=True, help="encoder log CSV (t_ms,left_count,right_count)")
    p.add_argument("--out", required=True, help="estimated trajectory CSV")
    p.add_argument("--config", help="run config JSON supplying geometry, encoder and filter")
    p.add_argument("--profile", help="calibration profile JSON (overrides the config's)")
    p.add_argument("--wheel-radius", type=float)
    p.add_argument("--track-width", type=float)
    p.add_argument("--start", type=float, nargs=3, metavar=("X", "Y", "THETA"))
    p.set_defaults(func=cmd_replay)

    for name, func, help_text in (
        ("evaluate", cmd_evaluate, "print endpoint error 'dx dy norm' and optionally write a report"),
        ("plot", cmd_plot, "render estimated and true paths to SVG"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--estimate", required=True, help="estimated trajectory CSV")
        p.add_argument("--truth", required=True, help="true trajectory CSV")
        if name == "evaluate":
            p.add_argument("--out", help="error report JSON")
            p.add_argument("--waypoint-times", type=_parse_times, default=[],
                           help="comma-separated times (s) for per-waypoint errors")
        else:
            p.add_argument("--out", required=True, help="SVG output path")
            p.add_argument("--title")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "calibrate" and args.kind == "heading" and args.actual_deg is None:
        parser.error("--actual-deg is required for --kind heading")
    try:
        return args.func(args)
    except (OdometryError, ValueError) as exc:
        print(f"odokit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"odokit {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
