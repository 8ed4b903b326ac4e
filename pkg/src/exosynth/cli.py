"""Command-line entry point: solve, jacobian, statics, sensitivity, optimize, simulate.

Angles on the command line and in every CSV are degrees. Without --output
the main table goes to stdout; with it, every table of the subcommand is
written into that directory.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from exosynth.exceptions import ConfigError, ExosynthError, StaticsError
from exosynth.kinematics.differential import state_reduced_jacobian
from exosynth.kinematics.pose_solver import solve_pose
from exosynth.kinematics.statics import ActuatorWrench, grasp_stability, joint_torques, torque_ratio
from exosynth.mechanism.config import load_anthropometry, load_geometry, reference_geometry
from exosynth.mechanism.geometry import DEVICE, STATE_FIELDS, Anthropometry, Geometry
from exosynth.simulation.contact import object_from_spec
from exosynth.simulation.grasp import CONTACT_STIFFNESS, FingerImpedance, simulate_grasp, stroke_schedule
from exosynth.synthesis.exhaustive_search import ExhaustiveSearch, elimination_summary
from exosynth.synthesis.search_space import DEFAULT_RANGES, OPTIMIZED_LENGTHS, SearchSpace, WorkspaceSweepSpec
from exosynth.synthesis.sensitivity import (
    REPRESENTATIVE_POSE,
    bar_plot_data,
    rank_parameters,
    retained_set_diagnostic,
    sensitivity_table,
)
from exosynth.utils import emit_csv, write_csv_atomic

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
_REFERENCE_NAMES = ("reference", "reference_index.cfg")


def _geometry(args: argparse.Namespace) -> Geometry:
    source = args.geometry
    if source is None or (source in _REFERENCE_NAMES and not Path(source).exists()):
        return reference_geometry()
    return load_geometry(source)


def _anthropometry(args: argparse.Namespace) -> Anthropometry:
    return load_anthropometry(args.anthropometry)


def _emit(tables: Dict[str, pd.DataFrame], main: str, output: Optional[Path]) -> None:
    if output is None:
        emit_csv(tables[main], sys.stdout)
        return
    for name, frame in tables.items():
        write_csv_atomic(frame, output / f"{name}.csv")


def _pose_row(theta_mcp: float, theta_pip: float) -> Dict[str, float]:
    return {"theta_mcp": theta_mcp, "theta_pip": theta_pip}


def _cmd_solve(args: argparse.Namespace) -> int:
    geom = _geometry(args)
    pose = geom.finger_pose(args.mcp, args.pip, _anthropometry(args))
    state = solve_pose(pose, geom)
    row = _pose_row(args.mcp, args.pip)
    for name in STATE_FIELDS:
        value = getattr(state, name)
        row[name] = math.degrees(value) if name.startswith("q_") else value
    _emit({"solve": pd.DataFrame([row])}, "solve", args.output)
    return EXIT_OK


def _cmd_jacobian(args: argparse.Namespace) -> int:
    geom = _geometry(args)
    pose = geom.finger_pose(args.mcp, args.pip, _anthropometry(args))
    j_a = state_reduced_jacobian(solve_pose(pose, geom), pose, geom)
    row = _pose_row(args.mcp, args.pip)
    for i in range(2):
        for j in range(2):
            row[f"J{i + 1}{j + 1}"] = j_a.J_A[i, j]
    row["condition"] = j_a.condition
    _emit({"jacobian": pd.DataFrame([row])}, "jacobian", args.output)
    return EXIT_OK


def _cmd_statics(args: argparse.Namespace) -> int:
    geom = _geometry(args)
    pose = geom.finger_pose(args.mcp, args.pip, _anthropometry(args))
    j_a = state_reduced_jacobian(solve_pose(pose, geom), pose, geom)
    torques = joint_torques(j_a, ActuatorWrench(f_ac=args.force))
    try:
        ratio = torque_ratio(torques)
    except StaticsError as e:
        logger.warning(str(e))
        ratio = math.nan
    try:
        stability = grasp_stability(torques).value
    except StaticsError as e:
        logger.warning(str(e))
        stability = "indeterminate"
    row = _pose_row(args.mcp, args.pip)
    row.update(f_ac=args.force, tau_1=torques.tau_1, tau_2=torques.tau_2, ratio=ratio, stability=stability)
    _emit({"statics": pd.DataFrame([row])}, "statics", args.output)
    return EXIT_OK


def _cmd_sensitivity(args: argparse.Namespace) -> int:
    geom = _geometry(args)
    pose = geom.finger_pose(args.mcp, args.pip, _anthropometry(args))
    records = rank_parameters(geom, pose, delta=args.delta, show_progress=args.progress, workers=args.workers)
    diagnostic = retained_set_diagnostic(records, args.threshold)
    logger.info(f"retained set reproduced: {diagnostic['reproduced']}, frozen signs {diagnostic['frozen_signs']}")
    tables = {
        "sensitivity": sensitivity_table(records, args.threshold),
        "sensitivity_bars": bar_plot_data(records),
    }
    _emit(tables, "sensitivity", args.output)
    return EXIT_OK


def _parse_ranges(values: Sequence[str]) -> Dict[str, tuple]:
    ranges = dict(DEFAULT_RANGES)
    for value in values:
        name, _, bounds = value.partition("=")
        name = name.strip()
        if name not in OPTIMIZED_LENGTHS:
            raise ValueError(f"--range names one of {', '.join(OPTIMIZED_LENGTHS)}, got {name!r}")
        try:
            low, high = (float(v) for v in bounds.split(":"))
        except ValueError:
            raise ValueError(f"--range expects NAME=LOW:HIGH, got {value!r}")
        ranges[name] = (low, high)
    return ranges


def _cmd_optimize(args: argparse.Namespace) -> int:
    search = ExhaustiveSearch(
        space=SearchSpace(ranges=_parse_ranges(args.range), step=args.step),
        sweep=WorkspaceSweepSpec(mcp_stop=args.mcp_max, pip_stop=args.pip_max, step=args.sweep_step),
        f_ac=args.force,
        base=_geometry(args),
        anthropometry=_anthropometry(args),
        workers=args.workers,
        chunk_size=args.chunk_size,
    )
    reports = search.evaluate(show_progress=args.progress)
    if args.output is not None:
        write_csv_atomic(elimination_summary(reports), args.output / "elimination.csv")
    result = search.summarize(reports)
    _emit(
        {"ranked": result.ranked, "elimination": result.elimination, "p_curve": result.p_curve},
        "ranked",
        args.output,
    )
    for key, value in result.diagnostics.items():
        logger.info(f"{key}: {value}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    geom = _geometry(args)
    if geom.seed is None:
        raise ConfigError("Geometry file has no extension seed")
    start = geom.seed.l_x
    schedule = stroke_schedule(start, args.stop, args.step)
    if args.release:
        schedule = np.concatenate([schedule, stroke_schedule(args.stop, start, args.step)[1:]])
    trace = simulate_grasp(
        geom,
        anthropometry=_anthropometry(args),
        impedance=FingerImpedance(k_mcp=args.k_mcp, k_pip=args.k_pip),
        obj=object_from_spec(args.object),
        schedule=schedule,
        contact_stiffness=args.contact_stiffness,
        max_force=args.max_force,
    )
    stability = trace.stability.value if trace.stability is not None else "indeterminate"
    logger.info(f"final grasp: {stability}")
    _emit({"trace": trace.to_frame()}, "trace", args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--geometry", default=None, help="Geometry config file (default: packaged reference)")
    common.add_argument("--anthropometry", default=None, help="small, medium, big or a config file (default: medium)")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--workers", type=int, default=None, help="Worker processes for optimize and sensitivity, 0 = one per CPU")
    common.add_argument("--no-progress", dest="progress", action="store_false", help="Hide progress bars")
    common.add_argument("--output", type=Path, default=None, help="Directory for the CSV outputs (default: stdout)")

    parser = argparse.ArgumentParser(prog="exosynth", description="Hand exoskeleton finger mechanism toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def pose_command(name: str, help_text: str, mcp: float = 0.0, pip: float = 0.0) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.add_argument("--mcp", type=float, default=mcp, help="MCP flexion (deg)")
        cmd.add_argument("--pip", type=float, default=pip, help="PIP flexion (deg)")
        return cmd

    pose_command("solve", "Close the loops at one finger pose").set_defaults(handler=_cmd_solve)
    pose_command("jacobian", "Reduced Jacobian at one finger pose").set_defaults(handler=_cmd_jacobian)

    statics = pose_command("statics", "Joint torques at one finger pose")
    statics.add_argument("--force", type=float, default=DEVICE.max_force, help="Actuator force (N)")
    statics.set_defaults(handler=_cmd_statics)

    sensitivity = pose_command("sensitivity", "One-at-a-time length sensitivity", *REPRESENTATIVE_POSE)
    sensitivity.add_argument("--delta", type=float, default=0.10, help="Relative perturbation")
    sensitivity.add_argument("--threshold", type=float, default=0.10, help="SI_g above which a length is retained")
    sensitivity.set_defaults(handler=_cmd_sensitivity)

    optimize = sub.add_parser("optimize", parents=[common], help="Exhaustive search over the link lengths")
    optimize.add_argument("--range", action="append", default=[], metavar="NAME=LOW:HIGH")
    optimize.add_argument("--step", type=float, default=1.0, help="Length step (mm)")
    optimize.add_argument("--sweep-step", type=float, default=10.0, help="Pose grid step (deg)")
    optimize.add_argument("--mcp-max", type=float, default=80.0)
    optimize.add_argument("--pip-max", type=float, default=90.0)
    optimize.add_argument("--force", type=float, default=1.0, help="Actuator force (N)")
    optimize.add_argument("--chunk-size", type=int, default=2048)
    optimize.set_defaults(handler=_cmd_optimize)

    simulate = sub.add_parser("simulate", parents=[common], help="Quasi-static grasp of a rigid object")
    simulate.add_argument("--object", required=True, help="disc:x,y,r or polygon:x1,y1;x2,y2;... (mm)")
    simulate.add_argument("--stop", type=float, default=15.0, help="Final actuator stroke (mm)")
    simulate.add_argument("--step", type=float, default=0.5, help="Stroke increment (mm)")
    simulate.add_argument("--release", action="store_true", help="Drive back to extension afterwards")
    simulate.add_argument("--k-mcp", type=float, default=50.0, help="MCP stiffness (N*mm/rad)")
    simulate.add_argument("--k-pip", type=float, default=50.0, help="PIP stiffness (N*mm/rad)")
    simulate.add_argument("--contact-stiffness", type=float, default=CONTACT_STIFFNESS, help="N/mm")
    simulate.add_argument("--max-force", type=float, default=DEVICE.max_force, help="Actuator force limit (N)")
    simulate.set_defaults(handler=_cmd_simulate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    try:
        return args.handler(args)
    except (ConfigError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ExosynthError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
