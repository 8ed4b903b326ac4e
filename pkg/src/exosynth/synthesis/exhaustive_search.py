"""Exhaustive link-length search with two elimination filters.

Every candidate is swept over the pose grid once. The linear filter checks
actuator and slider travels, the static filter checks the MCP/PIP torque
ratio at unit actuator force, and the cost p is the mean torque magnitude over
the grid. Both filters are independent predicates evaluated on the same
sweep, so their order never changes the feasible set.

Candidates are evaluated in fixed-size chunks, each chunk as one numpy batch
through the shared Newton solver. Chunks may run in worker processes; results
are merged by candidate id, so the worker count never changes the output.
"""

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from attr import dataclass
from tqdm.auto import tqdm

from exosynth.exceptions import ExosynthError, GeometryError, NoFeasibleCandidate
from exosynth.kinematics.differential import batch_reduced_jacobian, state_reduced_jacobian
from exosynth.kinematics.pose_solver import (
    SolverSettings,
    SolveStatus,
    check_limits,
    grid_walk,
    solve_pose,
    walk_solve,
)
from exosynth.kinematics.statics import ActuatorWrench, anatomical_torques, joint_torques
from exosynth.mechanism.config import reference_geometry
from exosynth.mechanism.geometry import DEVICE, Anthropometry, AnthropometryPreset, Geometry, composite_lengths
from exosynth.mechanism.loops import stack_loop_parameters
from exosynth.utils import worker_count

from .search_space import (
    OPTIMIZED_LENGTHS,
    PUBLISHED_OPTIMUM,
    SearchSpace,
    WorkspaceSweepSpec,
    compose_candidate,
)

logger = logging.getLogger(__name__)

RATIO_MIN = 1.0
RATIO_MAX = 7.5
LIMIT_TOLERANCE = 1e-6
"""Slack (mm) on the travel bounds, well above the closure tolerance"""
TORQUE_FLOOR = 1e-12
CHUNK_SIZE = 2048

PUBLISHED_LINEAR_ELIMINATION = 0.65
PUBLISHED_STATIC_ELIMINATION = 0.90
ELIMINATION_BAND = 0.15
PUBLISHED_P_SPREAD = 1.5

RANKED_COLUMNS = [
    "candidate_id", *OPTIMIZED_LENGTHS, "p", "min_ratio", "max_ratio", "max_lx", "max_c1", "max_c2",
]
REPORT_COLUMNS = [
    "candidate_id", *OPTIMIZED_LENGTHS, "linear_pass", "static_pass", "feasible", "p", "p_min",
    "min_ratio", "max_ratio", "min_lx", "max_lx", "min_c1", "max_c1", "min_c2", "max_c2",
    "max_tau_1", "max_tau_2", "reason",
]

_LINEAR_REASONS = {
    1: "closure failed",
    2: "l_x below 0",
    3: "l_max exceeded",
    4: "c1 below 0",
    5: "c1_max exceeded",
    6: "c2 below 0",
    7: "c2_max exceeded",
}
_STATIC_REASONS = {
    1: "torques unavailable",
    2: "zero torque",
    3: "torques of opposite sign",
    4: "torque ratio out of range",
}


@dataclass(frozen=True)
class CandidateReport:
    candidate_id: int
    lengths: Dict[str, float]
    linear_pass: bool
    static_pass: bool
    p: float
    """Mean torque magnitude per newton of actuator force, NaN unless both filters pass"""
    p_min: float
    min_ratio: float
    max_ratio: float
    min_lx: float
    max_lx: float
    min_c1: float
    max_c1: float
    min_c2: float
    max_c2: float
    max_tau_1: float
    max_tau_2: float
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.linear_pass and self.static_pass

    @classmethod
    def from_row(cls, row: pd.Series) -> "CandidateReport":
        return cls(
            candidate_id=int(row["candidate_id"]),
            lengths={name: float(row[name]) for name in OPTIMIZED_LENGTHS},
            linear_pass=bool(row["linear_pass"]),
            static_pass=bool(row["static_pass"]),
            reason="" if pd.isna(row["reason"]) else str(row["reason"]),
            **{
                name: float(row[name])
                for name in ("p", "p_min", "min_ratio", "max_ratio", "min_lx", "max_lx", "min_c1",
                             "max_c1", "min_c2", "max_c2", "max_tau_1", "max_tau_2")
            },
        )


@dataclass(frozen=True)
class _ChunkTask:
    lengths: np.ndarray
    first_id: int
    space: SearchSpace
    sweep: WorkspaceSweepSpec
    base: Geometry
    anthropometry: Anthropometry
    f_ac: float
    l_max: float
    settings: SolverSettings


def _pose_label(theta_mcp: float, theta_pip: float) -> str:
    return f"({theta_mcp:g},{theta_pip:g})"


def _linear_codes(x: np.ndarray, solved: np.ndarray, anthropometry: Anthropometry, l_max: float) -> np.ndarray:
    tol = LIMIT_TOLERANCE
    l_x, c1, c2 = x[..., 0], x[..., 1], x[..., 2]
    checks = [
        ~solved,
        l_x < -tol,
        l_x > l_max + tol,
        c1 < -tol,
        c1 > anthropometry.c1_max + tol,
        c2 < -tol,
        c2 > anthropometry.c2_max + tol,
    ]
    codes = np.zeros(l_x.shape, dtype=int)
    for code, failing in reversed(list(enumerate(checks, start=1))):
        codes[failing] = code
    return codes


def _static_codes(tau: np.ndarray, available: np.ndarray) -> np.ndarray:
    tau_1, tau_2 = tau[..., 0], tau[..., 1]
    with np.errstate(all="ignore"):
        ratio = tau_1 / tau_2
    checks = [
        ~available,
        (np.abs(tau_1) < TORQUE_FLOOR) | (np.abs(tau_2) < TORQUE_FLOOR),
        np.sign(tau_1) != np.sign(tau_2),
        (ratio < RATIO_MIN) | (ratio > RATIO_MAX),
    ]
    codes = np.zeros(tau_1.shape, dtype=int)
    for code, failing in reversed(list(enumerate(checks, start=1))):
        codes[failing] = code
    return codes


def _first_failure(codes: np.ndarray, poses: Sequence, names: Dict[int, str], extra=None) -> List[str]:
    failed = codes != 0
    first = np.argmax(failed, axis=0)
    reasons = []
    for b in range(codes.shape[1]):
        if not failed[:, b].any():
            reasons.append("")
            continue
        k = first[b]
        text = f"{names[codes[k, b]]} at pose {_pose_label(*poses[k])}"
        if extra is not None:
            text += extra(k, b, codes[k, b])
        reasons.append(text)
    return reasons


def _nan_reduce(fn, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    # all-NaN columns reduce to NaN without the RuntimeWarning
    masked = np.where(mask, values, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fn(masked, axis=0)


@dataclass(frozen=True)
class SweepArrays:
    """Closure states and unit-force torques of a batch of geometries on the pose grid."""

    poses: List[Tuple[float, float]]
    """(MCP, PIP) of every grid pose in walk order (deg)"""
    x: np.ndarray
    """States, shape (poses, geometries, 8)"""
    solved: np.ndarray
    tau: np.ndarray
    """Anatomical torques (N*mm), NaN where unavailable"""
    available: np.ndarray
    f_ac: float


def sweep_candidates(
    geoms: Sequence[Geometry],
    sweep: WorkspaceSweepSpec,
    anthropometry: Anthropometry,
    f_ac: float = 1.0,
    settings: Optional[SolverSettings] = None,
) -> SweepArrays:
    """Solve every geometry over the pose grid by continuation and transmit `f_ac` through each state."""
    settings = settings or SolverSettings()
    if any(geom.seed is None for geom in geoms):
        raise ValueError("Every swept geometry needs an extension seed")
    params = stack_loop_parameters(geoms, anthropometry)
    seeds = np.stack([geom.seed.as_array() for geom in geoms])
    q_o1_ref = np.array([geom.q_o1_ref for geom in geoms])

    walk = grid_walk(sweep.mcp_values(), sweep.pip_values(), settings.max_substep)
    states, status = walk_solve(walk, params, seeds, q_o1_ref, settings)
    grid_steps = [s for s, step in enumerate(walk) if step.grid_index is not None]
    poses = [(walk[s].theta_mcp, walk[s].theta_pip) for s in grid_steps]
    x = states[grid_steps]
    solved = status[grid_steps] == SolveStatus.CONVERGED

    theta = np.radians(np.array(poses))
    q_o1 = q_o1_ref[None, :] - theta[:, 0, None]
    q_fin = np.stack([q_o1, q_o1 - theta[:, 1, None]], axis=-1)
    j_a, inverted = batch_reduced_jacobian(np.where(solved[..., None], x, 0.0), q_fin, params)
    available = solved & inverted
    j_a_t = np.where(available[..., None, None], np.swapaxes(j_a, -1, -2), np.eye(2))
    rhs = np.broadcast_to(np.array([f_ac, 0.0]), j_a_t.shape[:-1])
    tau = anatomical_torques(np.linalg.solve(j_a_t, rhs[..., None])[..., 0])
    tau[~available] = np.nan
    return SweepArrays(poses=poses, x=x, solved=solved, tau=tau, available=available, f_ac=f_ac)


@dataclass(frozen=True)
class FilterResult:
    passed: bool
    reason: str = ""


def _single(cand: Geometry, sweep, anthropometry, f_ac, settings) -> SweepArrays:
    composite_lengths(cand)
    return sweep_candidates(
        [cand], sweep or WorkspaceSweepSpec(), anthropometry or AnthropometryPreset.MEDIUM.value, f_ac, settings
    )


def prefilter_linear(
    cand: Geometry,
    sweep: Optional[WorkspaceSweepSpec] = None,
    anthropometry: Optional[Anthropometry] = None,
    l_max: float = DEVICE.stroke,
    settings: Optional[SolverSettings] = None,
) -> FilterResult:
    """Actuator and slider travels within their bounds at every grid pose; a failed closure fails."""
    anthropometry = anthropometry or AnthropometryPreset.MEDIUM.value
    arrays = _single(cand, sweep, anthropometry, 1.0, settings)
    codes = _linear_codes(arrays.x, arrays.solved, anthropometry, l_max)
    reason = _first_failure(codes, arrays.poses, _LINEAR_REASONS)[0]
    return FilterResult(passed=not reason, reason=reason)


def prefilter_static(
    cand: Geometry,
    sweep: Optional[WorkspaceSweepSpec] = None,
    f_ac: float = 1.0,
    anthropometry: Optional[Anthropometry] = None,
    settings: Optional[SolverSettings] = None,
) -> FilterResult:
    """Torques of one sign with 1 <= tau_1/tau_2 <= 7.5 at every grid pose."""
    arrays = _single(cand, sweep, anthropometry, f_ac, settings)
    codes = _static_codes(arrays.tau, arrays.available)
    with np.errstate(all="ignore"):
        ratio = arrays.tau[..., 0] / arrays.tau[..., 1]
    reason = _first_failure(codes, arrays.poses, _STATIC_REASONS, _ratio_detail(ratio))[0]
    return FilterResult(passed=not reason, reason=reason)


def cost(
    cand: Geometry,
    sweep: Optional[WorkspaceSweepSpec] = None,
    f_ac: float = 1.0,
    anthropometry: Optional[Anthropometry] = None,
    settings: Optional[SolverSettings] = None,
) -> float:
    """Mean torque magnitude over the grid per newton of actuator force.

    Raises:
        ValueError: if the torques are unavailable at some grid pose.
    """
    arrays = _single(cand, sweep, anthropometry, f_ac, settings)
    if not arrays.available.all():
        k = int(np.argmin(arrays.available[:, 0]))
        raise ValueError(f"Torques unavailable at pose {_pose_label(*arrays.poses[k])}")
    return float(np.mean(np.hypot(arrays.tau[:, 0, 0], arrays.tau[:, 0, 1])) / f_ac)


@dataclass(frozen=True)
class FrameGates:
    """How one link set fares on a set of frame constants over the pose grid."""

    closed: bool
    within_limits: bool
    min_ratio: float
    max_ratio: float
    max_tau_1: float
    """Largest |tau_MCP| over the grid at the gate force (N*mm)"""
    max_tau_2: float
    band: float

    @property
    def ratio_ok(self) -> bool:
        return RATIO_MIN <= self.min_ratio and self.max_ratio <= RATIO_MAX

    @property
    def torques_reproduced(self) -> bool:
        return (
            abs(self.max_tau_1 - DEVICE.max_mcp_torque) <= self.band * DEVICE.max_mcp_torque
            and abs(self.max_tau_2 - DEVICE.max_pip_torque) <= self.band * DEVICE.max_pip_torque
        )

    @property
    def passed(self) -> bool:
        return self.closed and self.within_limits and self.ratio_ok and self.torques_reproduced


def frame_gates(
    geom: Geometry,
    sweep: Optional[WorkspaceSweepSpec] = None,
    anthropometry: Optional[Anthropometry] = None,
    f_ac: float = DEVICE.max_force,
    band: float = 0.25,
    settings: Optional[SolverSettings] = None,
) -> FrameGates:
    """Closure, travel limits, torque ratio and rated torques of `geom` over the grid."""
    anthropometry = anthropometry or AnthropometryPreset.MEDIUM.value
    arrays = _single(geom, sweep, anthropometry, f_ac, settings)
    linear = _linear_codes(arrays.x, arrays.solved, anthropometry, DEVICE.stroke)
    with np.errstate(all="ignore"):
        ratio = arrays.tau[..., 0] / arrays.tau[..., 1]
    available = arrays.available
    return FrameGates(
        closed=bool(arrays.solved.all()),
        within_limits=not bool((linear != 0).any()),
        min_ratio=float(_nan_reduce(np.nanmin, ratio, available)[0]),
        max_ratio=float(_nan_reduce(np.nanmax, ratio, available)[0]),
        max_tau_1=float(_nan_reduce(np.nanmax, np.abs(arrays.tau[..., 0]), available)[0]),
        max_tau_2=float(_nan_reduce(np.nanmax, np.abs(arrays.tau[..., 1]), available)[0]),
        band=band,
    )


def _ratio_detail(ratio: np.ndarray):
    def detail(k: int, b: int, code: int) -> str:
        return f" (ratio {ratio[k, b]:.3f})" if code == 4 else ""

    return detail


def evaluate_chunk(task: _ChunkTask) -> pd.DataFrame:
    """Evaluate one chunk of candidates as a single batch."""
    ids = task.first_id + np.arange(len(task.lengths))
    geoms: List[Optional[Geometry]] = []
    geometry_errors: Dict[int, str] = {}
    for b, row in enumerate(task.lengths):
        try:
            geom = compose_candidate(dict(zip(OPTIMIZED_LENGTHS, row)), task.space, task.base)
            composite_lengths(geom)
            geoms.append(geom)
        except GeometryError as e:
            geoms.append(None)
            geometry_errors[b] = f"invalid geometry: {e}"
    valid = np.array([g is not None for g in geoms])
    batch = len(geoms)
    # invalid rows are swept on the base geometry and overwritten below
    arrays = sweep_candidates(
        [g if g is not None else task.base for g in geoms], task.sweep, task.anthropometry, task.f_ac, task.settings
    )
    poses, x, tau = arrays.poses, arrays.x, arrays.tau
    solved = arrays.solved & valid[None, :]
    available = arrays.available & valid[None, :]

    linear = _linear_codes(x, solved, task.anthropometry, task.l_max)
    static = _static_codes(tau, available)
    linear_pass = ~(linear != 0).any(axis=0) & valid
    static_pass = ~(static != 0).any(axis=0) & valid

    with np.errstate(all="ignore"):
        ratio = tau[..., 0] / tau[..., 1]
    magnitude = np.hypot(tau[..., 0], tau[..., 1]) / task.f_ac
    mean_p = _nan_reduce(np.nanmean, magnitude, available)
    feasible = linear_pass & static_pass

    linear_reasons = _first_failure(linear, poses, _LINEAR_REASONS)
    static_reasons = _first_failure(static, poses, _STATIC_REASONS, _ratio_detail(ratio))
    reasons = []
    for b in range(batch):
        if b in geometry_errors:
            reasons.append(geometry_errors[b])
        elif linear_reasons[b]:
            reasons.append(linear_reasons[b])
        else:
            reasons.append(static_reasons[b])

    frame = pd.DataFrame({"candidate_id": ids})
    for k, name in enumerate(OPTIMIZED_LENGTHS):
        frame[name] = task.lengths[:, k]
    frame["linear_pass"] = linear_pass
    frame["static_pass"] = static_pass
    frame["feasible"] = feasible
    frame["p"] = np.where(feasible, mean_p, np.nan)
    frame["p_min"] = _nan_reduce(np.nanmin, magnitude, available)
    frame["min_ratio"] = _nan_reduce(np.nanmin, ratio, available)
    frame["max_ratio"] = _nan_reduce(np.nanmax, ratio, available)
    for column, name in ((0, "lx"), (1, "c1"), (2, "c2")):
        frame[f"min_{name}"] = _nan_reduce(np.nanmin, x[..., column], solved)
        frame[f"max_{name}"] = _nan_reduce(np.nanmax, x[..., column], solved)
    frame["max_tau_1"] = _nan_reduce(np.nanmax, np.abs(tau[..., 0]), available)
    frame["max_tau_2"] = _nan_reduce(np.nanmax, np.abs(tau[..., 1]), available)
    frame["reason"] = reasons
    return frame[REPORT_COLUMNS]


def rank_candidates(reports: pd.DataFrame) -> pd.DataFrame:
    """Feasible candidates by p descending; equal p goes to the lexicographically smaller lengths."""
    feasible = reports[reports["feasible"]]
    ranked = feasible.sort_values(
        ["p", *OPTIMIZED_LENGTHS],
        ascending=[False] + [True] * len(OPTIMIZED_LENGTHS),
        kind="mergesort",
    )
    return ranked[RANKED_COLUMNS].reset_index(drop=True)


def elimination_summary(reports: pd.DataFrame) -> pd.DataFrame:
    """Candidate counts through both filters, one row per stage."""
    evaluated = len(reports)
    linear_failures = int((~reports["linear_pass"]).sum())
    survivors = evaluated - linear_failures
    static_failures = int((reports["linear_pass"] & ~reports["static_pass"]).sum())
    feasible = int(reports["feasible"].sum())
    rows = [
        {"stage": "evaluated", "count": evaluated, "eliminated": 0, "fraction": 0.0},
        {
            "stage": "linear",
            "count": survivors,
            "eliminated": linear_failures,
            "fraction": linear_failures / evaluated if evaluated else math.nan,
        },
        {
            "stage": "static",
            "count": feasible,
            "eliminated": static_failures,
            "fraction": static_failures / survivors if survivors else math.nan,
        },
    ]
    return pd.DataFrame(rows, columns=["stage", "count", "eliminated", "fraction"])


def p_curve(ranked: pd.DataFrame) -> pd.DataFrame:
    """Sorted cost curve of the feasible set, best first."""
    return pd.DataFrame({
        "rank": np.arange(1, len(ranked) + 1),
        "candidate_id": ranked["candidate_id"].to_numpy(),
        "p": ranked["p"].to_numpy(),
    })


@dataclass(frozen=True)
class OptimizationResult:
    best: CandidateReport
    reports: pd.DataFrame
    ranked: pd.DataFrame
    elimination: pd.DataFrame
    p_curve: pd.DataFrame
    diagnostics: Dict[str, object]


def published_diagnostics(elimination: pd.DataFrame, ranked: pd.DataFrame) -> Dict[str, object]:
    """How far the run is from the prototype's reported search statistics."""
    fractions = elimination.set_index("stage")["fraction"]
    linear = float(fractions["linear"])
    static = float(fractions["static"])
    diagnostics: Dict[str, object] = {
        "linear_elimination": linear,
        "linear_reproduced": abs(linear - PUBLISHED_LINEAR_ELIMINATION) <= ELIMINATION_BAND,
        "static_elimination": static,
        "static_reproduced": abs(static - PUBLISHED_STATIC_ELIMINATION) <= ELIMINATION_BAND,
    }
    if len(ranked):
        spread = float(ranked["p"].iloc[0] / ranked["p"].iloc[-1])
        best = ranked.iloc[0]
        diagnostics["p_spread"] = spread
        diagnostics["p_spread_reproduced"] = spread >= PUBLISHED_P_SPREAD
        diagnostics["distance_from_published"] = float(
            sum(abs(best[name] - PUBLISHED_OPTIMUM[name]) for name in OPTIMIZED_LENGTHS)
        )
    if not diagnostics["linear_reproduced"]:
        logger.warning(f"linear filter eliminated {linear:.1%}, published {PUBLISHED_LINEAR_ELIMINATION:.0%}")
    if not diagnostics["static_reproduced"]:
        logger.warning(f"static filter eliminated {static:.1%} of survivors, published {PUBLISHED_STATIC_ELIMINATION:.0%}")
    if diagnostics.get("p_spread_reproduced") is False:
        logger.warning(f"p spread {diagnostics['p_spread']:.3f} is below {PUBLISHED_P_SPREAD}")
    return diagnostics


class ExhaustiveSearch:
    """
    Grid search over the optimized link lengths.
    """

    def __init__(
        self,
        space: Optional[SearchSpace] = None,
        sweep: Optional[WorkspaceSweepSpec] = None,
        f_ac: float = 1.0,
        base: Optional[Geometry] = None,
        anthropometry: Optional[Anthropometry] = None,
        l_max: float = DEVICE.stroke,
        settings: Optional[SolverSettings] = None,
        workers: Optional[int] = None,
        chunk_size: int = CHUNK_SIZE,
    ):
        if not f_ac > 0:
            raise ValueError(f"Actuator force must be positive, got {f_ac}")
        if chunk_size < 1:
            raise ValueError(f"Chunk size must be at least 1, got {chunk_size}")
        self.space = space or SearchSpace()
        self.sweep = sweep or WorkspaceSweepSpec()
        self.f_ac = f_ac
        self.base = base or reference_geometry()
        if self.base.seed is None:
            raise ValueError("Base geometry needs an extension seed")
        self.anthropometry = anthropometry or AnthropometryPreset.MEDIUM.value
        self.l_max = l_max
        self.settings = settings or SolverSettings()
        self.workers = worker_count(workers)
        self.chunk_size = chunk_size

    def _tasks(self) -> List[_ChunkTask]:
        lengths = self.space.lengths_array()
        return [
            _ChunkTask(
                lengths=lengths[start:start + self.chunk_size],
                first_id=start,
                space=self.space,
                sweep=self.sweep,
                base=self.base,
                anthropometry=self.anthropometry,
                f_ac=self.f_ac,
                l_max=self.l_max,
                settings=self.settings,
            )
            for start in range(0, len(lengths), self.chunk_size)
        ]

    def evaluate(self, show_progress: bool = False) -> pd.DataFrame:
        """Report of every candidate, ordered by candidate id."""
        tasks = self._tasks()
        logger.info(
            f"evaluating {self.space.cardinality} candidates on {self.sweep.n_poses} poses "
            f"in {len(tasks)} chunks with {self.workers} workers"
        )
        progress = tqdm(total=self.space.cardinality, desc="Evaluating candidates", disable=not show_progress)
        frames = []
        if self.workers == 1 or len(tasks) == 1:
            for task in tasks:
                frames.append(evaluate_chunk(task))
                progress.update(len(task.lengths))
        else:
            with ProcessPoolExecutor(max_workers=self.workers) as executor:
                for task, frame in zip(tasks, executor.map(evaluate_chunk, tasks)):
                    frames.append(frame)
                    progress.update(len(task.lengths))
        progress.close()
        reports = pd.concat(frames, ignore_index=True)
        return reports.sort_values("candidate_id", kind="mergesort", ignore_index=True)

    def summarize(self, reports: pd.DataFrame) -> OptimizationResult:
        """Rank evaluated candidates and pick the optimum.

        Raises:
            NoFeasibleCandidate: if no candidate passes both filters.
        """
        elimination = elimination_summary(reports)
        ranked = rank_candidates(reports)
        diagnostics = published_diagnostics(elimination, ranked)
        if ranked.empty:
            counts = elimination.set_index("stage")["eliminated"]
            raise NoFeasibleCandidate(len(reports), int(counts["linear"]), int(counts["static"]))
        best_row = reports.loc[reports["candidate_id"] == ranked["candidate_id"].iloc[0]].iloc[0]
        best = CandidateReport.from_row(best_row)
        logger.info(f"best candidate {best.candidate_id} with p = {best.p:.6g}")
        return OptimizationResult(
            best=best,
            reports=reports,
            ranked=ranked,
            elimination=elimination,
            p_curve=p_curve(ranked),
            diagnostics=diagnostics,
        )

    def run(self, show_progress: bool = False) -> OptimizationResult:
        return self.summarize(self.evaluate(show_progress=show_progress))

    def verify(self, report: CandidateReport) -> CandidateReport:
        return verify_candidate(
            report.lengths, self.space, self.sweep, self.base, self.anthropometry,
            self.f_ac, self.l_max, self.settings, candidate_id=report.candidate_id,
        )


def verify_candidate(
    lengths: Dict[str, float],
    space: Optional[SearchSpace] = None,
    sweep: Optional[WorkspaceSweepSpec] = None,
    base: Optional[Geometry] = None,
    anthropometry: Optional[Anthropometry] = None,
    f_ac: float = 1.0,
    l_max: float = DEVICE.stroke,
    settings: Optional[SolverSettings] = None,
    candidate_id: int = -1,
) -> CandidateReport:
    """Re-check one candidate pose by pose, independent of the batched engine.

    Each pose is solved from the extension seed on its own, then limits,
    torques, ratio and stability are evaluated through the scalar API.
    """
    space = space or SearchSpace.single_point(lengths)
    sweep = sweep or WorkspaceSweepSpec()
    base = base or reference_geometry()
    anthropometry = anthropometry or AnthropometryPreset.MEDIUM.value
    settings = settings or SolverSettings()
    geom = compose_candidate(lengths, space, base)
    wrench = ActuatorWrench(f_ac=f_ac)

    linear_reason = static_reason = ""
    l_x, c_1, c_2, ratios, magnitudes, tau_1, tau_2 = [], [], [], [], [], [], []
    for theta_mcp in sweep.mcp_values():
        for theta_pip in sweep.pip_values():
            label = _pose_label(theta_mcp, theta_pip)
            pose = geom.finger_pose(theta_mcp, theta_pip, anthropometry)
            try:
                state = solve_pose(pose, geom, settings=settings)
            except ExosynthError as e:
                linear_reason = linear_reason or f"closure failed at pose {label}"
                static_reason = static_reason or f"torques unavailable at pose {label}"
                logger.debug(f"{label}: {e}")
                continue
            l_x.append(state.l_x)
            c_1.append(state.c_1)
            c_2.append(state.c_2)
            limits = check_limits(state, anthropometry, l_max, tolerance=LIMIT_TOLERANCE)
            if not limits.all_ok and not linear_reason:
                linear_reason = f"travel limit violated at pose {label}"
            try:
                torques = joint_torques(state_reduced_jacobian(state, pose, geom), wrench)
            except ExosynthError:
                static_reason = static_reason or f"torques unavailable at pose {label}"
                continue
            t1, t2 = torques.tau_1, torques.tau_2
            tau_1.append(abs(t1))
            tau_2.append(abs(t2))
            magnitudes.append(math.hypot(t1, t2) / f_ac)
            ratio = t1 / t2 if t2 != 0 else math.nan
            ratios.append(ratio)
            same_sign = abs(t1) >= TORQUE_FLOOR and abs(t2) >= TORQUE_FLOOR and np.sign(t1) == np.sign(t2)
            if not (same_sign and RATIO_MIN <= ratio <= RATIO_MAX) and not static_reason:
                static_reason = f"torque ratio {ratio:.3f} at pose {label}"

    def stat(fn, values):
        return float(fn(values)) if values else math.nan

    linear_pass = not linear_reason
    static_pass = not static_reason
    return CandidateReport(
        candidate_id=candidate_id,
        lengths={name: float(lengths[name]) for name in OPTIMIZED_LENGTHS},
        linear_pass=linear_pass,
        static_pass=static_pass,
        p=stat(np.mean, magnitudes) if linear_pass and static_pass else math.nan,
        p_min=stat(np.min, magnitudes),
        min_ratio=stat(np.nanmin, ratios),
        max_ratio=stat(np.nanmax, ratios),
        min_lx=stat(np.min, l_x),
        max_lx=stat(np.max, l_x),
        min_c1=stat(np.min, c_1),
        max_c1=stat(np.max, c_1),
        min_c2=stat(np.min, c_2),
        max_c2=stat(np.max, c_2),
        max_tau_1=stat(np.max, tau_1),
        max_tau_2=stat(np.max, tau_2),
        reason=linear_reason or static_reason,
    )
