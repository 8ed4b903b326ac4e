"""Loop-closure solving.

One Newton implementation serves every caller: it works on a batch of
independent systems (one per row), so a single pose solve is a batch of one
and the optimizer pushes thousands of candidate geometries through the same
iterations. The branch of the closure equations is pinned by starting from the
extension seed of the geometry and walking to the requested pose in small
steps.
"""

import logging
import math
from enum import IntEnum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from attr import dataclass

from exosynth.exceptions import BranchEscape, NoConvergence, SingularIteration, SolverError
from exosynth.mechanism.geometry import (
    DEVICE,
    Anthropometry,
    FingerPose,
    Geometry,
    MechanismState,
    anatomical_to_internal,
    internal_to_anatomical,
)
from exosynth.mechanism.loops import LoopParameters, loop_parameters, residual_kernel

logger = logging.getLogger(__name__)

ANGLE_COLUMNS = slice(3, 8)


@dataclass(frozen=True)
class SolverSettings:
    tol_residual: float = 1e-10
    """Convergence threshold on the largest residual component (mm)"""
    max_iter: int = 50
    damping: float = 1.0
    """Initial step fraction of the line search, halved until the residual drops"""
    fd_step: float = 1e-7
    """Central-difference step for the iteration Jacobian"""
    max_halvings: int = 30
    condition_cap: float = 1e12
    branch_jump: float = math.pi / 2
    """Largest change of any angle unknown from the warm start (rad)"""
    max_substep: float = 5.0
    """Largest joint increment between consecutive continuation poses (deg)"""

    def __attrs_post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError(f"tol_residual must be positive, got {self.tol_residual}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must be in (0, 1], got {self.damping}")
        if not self.fd_step > 0:
            raise ValueError(f"fd_step must be positive, got {self.fd_step}")
        if not self.max_substep > 0:
            raise ValueError(f"max_substep must be positive, got {self.max_substep}")


class SolveStatus(IntEnum):
    CONVERGED = 0
    NO_CONVERGENCE = 1
    SINGULAR = 2
    BRANCH_ESCAPE = 3


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    """Final iterates, shape (B, 8)"""
    status: np.ndarray
    """`SolveStatus` code per row"""
    iterations: np.ndarray
    residual_norm: np.ndarray
    """Largest residual component per row (mm)"""

    @property
    def converged(self) -> np.ndarray:
        return self.status == SolveStatus.CONVERGED


@dataclass(frozen=True)
class LimitReport:
    lx_ok: bool
    c1_ok: bool
    c2_ok: bool
    lx_margin: float
    """Distance (mm) to the nearer bound, negative when violated"""
    c1_margin: float
    c2_margin: float

    @property
    def all_ok(self) -> bool:
        return self.lx_ok and self.c1_ok and self.c2_ok


@dataclass(frozen=True)
class WalkStep:
    """One pose of a continuation walk over anatomical angles (deg)."""

    theta_mcp: float
    theta_pip: float
    warm: int
    """Index of the step whose solution seeds this one, -1 for the geometry seed"""
    grid_index: Optional[Tuple[int, int]] = None


def _fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float) -> np.ndarray:
    # all 2n perturbed copies go through `fun` at once, perturbation axis first
    n = x.shape[-1]
    offsets = np.eye(n) * step
    stencil = np.concatenate([x[None] + offsets[:, None, :], x[None] - offsets[:, None, :]])
    r = fun(stencil)
    return np.moveaxis((r[:n] - r[n:]) / (2 * step), 0, -1)


def _wrapped(delta: np.ndarray) -> np.ndarray:
    return np.abs(np.angle(np.exp(1j * delta)))


def newton_solve(
    fun: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    settings: Optional[SolverSettings] = None,
    angle_columns: slice = ANGLE_COLUMNS,
) -> NewtonResult:
    """Damped Newton iteration on a batch of independent square systems.

    Args:
        fun: Residual function mapping (..., B, n) states to (..., B, n) residuals.
        x0: Starting points, shape (B, n). Also the warm start for the branch check.
        settings: Solver tolerances.
        angle_columns: Unknowns checked for branch escape, the state angles by default.

    Returns:
        A NewtonResult with per-row status; rows never influence each other.
    """
    settings = settings or SolverSettings()
    x0 = np.asarray(x0, dtype=float)
    x = x0.copy()
    batch, n = x.shape
    status = np.full(batch, SolveStatus.NO_CONVERGENCE, dtype=int)
    iterations = np.zeros(batch, dtype=int)
    active = np.ones(batch, dtype=bool)

    r = fun(x)
    norm = np.max(np.abs(r), axis=-1)
    norm[~np.isfinite(norm)] = np.inf
    identity = np.eye(n)

    for it in range(settings.max_iter + 1):
        done = active & (norm < settings.tol_residual)
        status[done] = SolveStatus.CONVERGED
        active &= ~done
        if not active.any() or it == settings.max_iter:
            break

        jac = _fd_jacobian(fun, x, settings.fd_step)
        broken = active & ~np.isfinite(jac).all(axis=(-2, -1))
        status[broken] = SolveStatus.SINGULAR
        active &= ~broken
        jac[~active] = identity
        with np.errstate(all="ignore"):
            condition = np.linalg.cond(jac)
        singular = active & ~(condition < settings.condition_cap)
        status[singular] = SolveStatus.SINGULAR
        active &= ~singular
        if not active.any():
            break
        jac[~active] = identity
        dx = np.linalg.solve(jac, -r[..., None])[..., 0]

        lam = np.full(batch, settings.damping)
        accepted = ~active
        for _ in range(settings.max_halvings):
            trial = ~accepted
            x_trial = x.copy()
            x_trial[trial] += lam[trial, None] * dx[trial]
            r_trial = fun(x_trial)
            norm_trial = np.max(np.abs(r_trial), axis=-1)
            better = trial & (norm_trial < norm)
            x[better] = x_trial[better]
            r[better] = r_trial[better]
            norm[better] = norm_trial[better]
            accepted |= better
            lam[trial & ~better] *= 0.5
            if accepted.all():
                break
        # a row whose line search found no descent has stalled
        active &= accepted
        iterations[active] += 1
        logger.debug(f"newton iteration {it}: {int(active.sum())} active, max residual {np.max(norm):.3e}")

    converged = status == SolveStatus.CONVERGED
    jump = np.max(_wrapped(x[:, angle_columns] - x0[:, angle_columns]), axis=-1)
    status[converged & (jump > settings.branch_jump)] = SolveStatus.BRANCH_ESCAPE
    return NewtonResult(x=x, status=status, iterations=iterations, residual_norm=norm)


def solve_batch(
    q_fin: np.ndarray,
    params: LoopParameters,
    x0: np.ndarray,
    settings: Optional[SolverSettings] = None,
) -> NewtonResult:
    """Close the loops of B systems: finger angles (B, 2), stacked params (B,), starts (B, 8)."""
    q_fin = np.asarray(q_fin, dtype=float)
    return newton_solve(lambda x: residual_kernel(x, q_fin, params), np.atleast_2d(x0), settings)


def raise_for_status(result: NewtonResult, row: int = 0) -> None:
    _raise_code(int(result.status[row]), float(result.residual_norm[row]))


def _raise_code(code: int, residual: float) -> None:
    if code == SolveStatus.CONVERGED:
        return
    if code == SolveStatus.SINGULAR:
        raise SingularIteration(f"Loop Jacobian is rank-deficient at an iterate (residual {residual:.3e} mm)")
    if code == SolveStatus.BRANCH_ESCAPE:
        raise BranchEscape("Solution left the working branch (an angle moved more than the allowed jump)")
    raise NoConvergence(f"Closure did not converge (residual {residual:.3e} mm)")


def _ramp(start: float, targets: Sequence[float], max_step: float):
    """Evenly spaced waypoints from `start` through each target, tagged with the target index."""
    current = start
    for k, target in enumerate(targets):
        count = max(1, math.ceil(abs(target - current) / max_step - 1e-9))
        if target == current:
            continue
        for i in range(1, count + 1):
            value = target if i == count else current + (target - current) * i / count
            yield value, (k if i == count else None)
        current = target


def grid_walk(
    mcp_values: Sequence[float],
    pip_values: Sequence[float],
    max_step: float = 5.0,
) -> List[WalkStep]:
    """Continuation schedule visiting every (MCP, PIP) grid pose from extension.

    Each MCP row is reached from the previous row's zero-PIP pose and then
    flexes the PIP joint through the row; consecutive poses differ by at most
    `max_step` degrees per joint.
    """
    mcp_values = [float(v) for v in mcp_values]
    pip_values = [float(v) for v in pip_values]
    if not mcp_values or not pip_values:
        raise ValueError("Grid walk needs at least one MCP and one PIP value")
    for name, values in (("MCP", mcp_values), ("PIP", pip_values)):
        if values[0] < 0:
            raise ValueError(f"{name} grid values must be non-negative, got {values}")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"{name} grid values must be strictly increasing, got {values}")

    steps: List[dict] = [dict(theta_mcp=0.0, theta_pip=0.0, warm=-1, grid_index=None)]
    anchor = 0
    mcp_prev = 0.0
    pip_targets = [p for p in pip_values if p != 0.0]
    pip_offset = len(pip_values) - len(pip_targets)
    for i, mcp in enumerate(mcp_values):
        if mcp != mcp_prev:
            for value, _ in _ramp(mcp_prev, [mcp], max_step):
                steps.append(dict(theta_mcp=value, theta_pip=0.0, warm=anchor, grid_index=None))
                anchor = len(steps) - 1
        mcp_prev = mcp
        if pip_offset:
            steps[anchor]["grid_index"] = (i, 0)
        last = anchor
        for value, k in _ramp(0.0, pip_targets, max_step):
            index = None if k is None else (i, k + pip_offset)
            steps.append(dict(theta_mcp=mcp, theta_pip=value, warm=last, grid_index=index))
            last = len(steps) - 1
    return [WalkStep(**step) for step in steps]


def _take_rows(params: LoopParameters, rows: np.ndarray, batch: int) -> LoopParameters:
    if rows.size == batch:
        return params
    return {key: value[rows] if np.ndim(value) else value for key, value in params.items()}


def walk_solve(
    walk: Sequence[WalkStep],
    params: LoopParameters,
    seeds: np.ndarray,
    q_o1_ref: np.ndarray,
    settings: Optional[SolverSettings] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Follow a continuation walk for a batch of geometries.

    Returns:
        (states, status): states of shape (len(walk), B, 8) and the status code
        per step and row. A row that fails keeps its failure status and its
        last iterate on every later step that depends on it, and is not
        solved again.
    """
    settings = settings or SolverSettings()
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    batch = seeds.shape[0]
    q_o1_ref = np.broadcast_to(np.asarray(q_o1_ref, dtype=float), (batch,))
    states = np.empty((len(walk), batch, seeds.shape[1]))
    status = np.empty((len(walk), batch), dtype=int)
    for s, step in enumerate(walk):
        x0 = seeds if step.warm < 0 else states[step.warm]
        prior = np.zeros(batch, dtype=int) if step.warm < 0 else status[step.warm]
        states[s] = x0
        status[s] = prior
        alive = np.flatnonzero(prior == SolveStatus.CONVERGED)
        if not alive.size:
            continue
        q_o1 = q_o1_ref[alive] - math.radians(step.theta_mcp)
        q_fin = np.stack([q_o1, q_o1 - math.radians(step.theta_pip)], axis=-1)
        result = solve_batch(q_fin, _take_rows(params, alive, batch), x0[alive], settings)
        states[s, alive] = result.x
        status[s, alive] = result.status
    return states, status


def _anatomical_walk(theta_mcp: float, theta_pip: float, max_step: float) -> List[WalkStep]:
    steps = [WalkStep(0.0, 0.0, -1)]
    for value, _ in _ramp(0.0, [theta_mcp], max_step):
        steps.append(WalkStep(value, 0.0, len(steps) - 1))
    for value, _ in _ramp(0.0, [theta_pip], max_step):
        steps.append(WalkStep(theta_mcp, value, len(steps) - 1))
    return steps


def solve_pose(
    pose: FingerPose,
    geom: Geometry,
    guess: Optional[MechanismState] = None,
    settings: Optional[SolverSettings] = None,
) -> MechanismState:
    """Solve the closure unknowns of one finger pose.

    Without a guess the solve walks from the extension seed of `geom` to the
    pose, flexing MCP first and PIP second in steps of at most
    `settings.max_substep` degrees.

    Raises:
        NoConvergence: the iteration budget ran out or the line search stalled.
        SingularIteration: the loop Jacobian became rank-deficient.
        BranchEscape: an angle jumped by more than `settings.branch_jump`.
    """
    settings = settings or SolverSettings()
    params = loop_parameters(geom, pose.anthropometry)
    if guess is not None:
        result = solve_batch(pose.q_fin[None], params, guess.as_array()[None], settings)
        raise_for_status(result)
        logger.debug(f"pose solved in {result.iterations[0]} iterations")
        return MechanismState.from_array(result.x[0])

    if geom.seed is None:
        raise ValueError("Geometry has no extension seed and no guess was given")
    theta_mcp, theta_pip = internal_to_anatomical(pose, geom.q_o1_ref)
    walk = _anatomical_walk(theta_mcp, theta_pip, settings.max_substep)
    states, status = walk_solve(walk, params, geom.seed.as_array()[None], geom.q_o1_ref, settings)
    failed = np.flatnonzero(status[:, 0] != SolveStatus.CONVERGED)
    if failed.size:
        step = walk[int(failed[0])]
        q_fin = anatomical_to_internal(step.theta_mcp, step.theta_pip, q_o1_ref=geom.q_o1_ref).q_fin
        residual = np.max(np.abs(residual_kernel(states[failed[0], 0], q_fin, params)))
        logger.debug(f"continuation failed at MCP {step.theta_mcp:.2f}, PIP {step.theta_pip:.2f} deg")
        _raise_code(int(status[failed[0], 0]), float(residual))
    # the walk ends on the requested angles up to rounding, finish on the exact pose
    result = solve_batch(pose.q_fin[None], params, states[-1], settings)
    raise_for_status(result)
    return MechanismState.from_array(result.x[0])


def sweep_workspace(
    path: Sequence[FingerPose],
    geom: Geometry,
    settings: Optional[SolverSettings] = None,
) -> List[MechanismState]:
    """Solve a trajectory, each pose warm-started from the previous solution.

    Raises:
        ValueError: on an empty path or a jump larger than `settings.max_substep`.
        SolverError: the failing pose's position is stored in `path_index`.
    """
    settings = settings or SolverSettings()
    if len(path) == 0:
        raise ValueError("Cannot sweep an empty path")
    limit = math.radians(settings.max_substep) + 1e-12
    for i in range(1, len(path)):
        step = max(abs(path[i].q_o1 - path[i - 1].q_o1), abs(path[i].q_o2 - path[i - 1].q_o2))
        if step > limit:
            raise ValueError(
                f"Path poses {i - 1} and {i} differ by {math.degrees(step):.3f} deg, "
                f"more than {settings.max_substep} deg"
            )

    states: List[MechanismState] = []
    guess = None
    for i, pose in enumerate(path):
        try:
            state = solve_pose(pose, geom, guess=guess, settings=settings)
        except SolverError as e:
            raise e.at_index(i)
        states.append(state)
        guess = state
    logger.info(f"swept {len(states)} poses")
    return states


def check_limits(
    state: MechanismState,
    anthro: Anthropometry,
    l_max: float = DEVICE.stroke,
    tolerance: float = 0.0,
) -> LimitReport:
    """Compare the actuator and slider travels against their closed bounds, widened by `tolerance` (mm)."""
    lx_margin = min(state.l_x, l_max - state.l_x)
    c1_margin = min(state.c_1, anthro.c1_max - state.c_1)
    c2_margin = min(state.c_2, anthro.c2_max - state.c_2)
    return LimitReport(
        lx_ok=lx_margin >= -tolerance,
        c1_ok=c1_margin >= -tolerance,
        c2_ok=c2_margin >= -tolerance,
        lx_margin=lx_margin,
        c1_margin=c1_margin,
        c2_margin=c2_margin,
    )
