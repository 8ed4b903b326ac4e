"""Velocity-level relations between the actuator and the finger.

Differentiating the closure residuals gives

    D_state(x) . x_dot + D_fin(x) . q_fin_dot = 0.

The eight rows are first rotated into a fixed equation order (row basis
below) and then split into the block form

    [J_Om; J_Op] q_fin_dot = [J_Tm J_Tp; J_Cm J_Cp] [q_m_dot; q_p_dot]

with q_fin = (q_o1, q_o2), q_m = (l_x, q_B) and
q_p = (q_K, q_D, q_G, q_N, c_1, c_2).

Equation order (pinned, rows of every block):
    0  Loop 2 normal to the proximal phalange
    1  Loop 3 normal to the intermediate phalange
    2  Loop 1 x
    3  Loop 1 y
    4  Loop 4 x
    5  Loop 4 y
    6  Loop 2 along u1, 45 deg between the proximal phalange and its normal
    7  Loop 3 along u2, 45 deg between the intermediate phalange and its normal

Rows 0-1 form the output blocks (J_O*, J_T*) and rows 2-7 the constraint
blocks (J_Op, J_C*). Rows 6-7 read the slider terms through cos 45 deg and
the phalange rotations through sin 45 deg, so

    J_Op[4:] = -[[c_1/sqrt 2, 0], [l_ML*sin(45 deg - theta_PIP), c_2/sqrt 2]]

and no block vanishes anywhere in the workspace, extension included. The
basis is not orthogonal; its determinant is 1/2 in magnitude.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from attr import dataclass

from exosynth.exceptions import OutputSingular, PassiveSingular
from exosynth.mechanism.geometry import FingerPose, Geometry, MechanismState
from exosynth.mechanism.loops import LoopParameters, jacobian_kernel, loop_parameters, residual_kernel

from .pose_solver import SolverSettings, newton_solve, raise_for_status, solve_pose

logger = logging.getLogger(__name__)

CONDITION_CAP = 1e12
MEASURED_COLUMNS = [0, 3]
"""State columns of (l_x, q_B)"""
PASSIVE_COLUMNS = [6, 4, 5, 7, 1, 2]
"""State columns of (q_K, q_D, q_G, q_N, c_1, c_2)"""
OBLIQUE = np.pi / 4
"""Angle of the slider constraint rows from their phalange (rad)"""


@dataclass(frozen=True)
class JacobianBlocks:
    J_Om: np.ndarray
    J_Op: np.ndarray
    J_Tm: np.ndarray
    J_Tp: np.ndarray
    J_Cm: np.ndarray
    J_Cp: np.ndarray

    def stacked_residual(self, q_fin_dot, q_m_dot, q_p_dot) -> np.ndarray:
        """Left side minus right side of the block equation for given velocities."""
        q_fin_dot, q_m_dot, q_p_dot = (np.asarray(v, dtype=float) for v in (q_fin_dot, q_m_dot, q_p_dot))
        top = self.J_Om @ q_fin_dot - self.J_Tm @ q_m_dot - self.J_Tp @ q_p_dot
        bottom = self.J_Op @ q_fin_dot - self.J_Cm @ q_m_dot - self.J_Cp @ q_p_dot
        return np.concatenate([top, bottom])


@dataclass(frozen=True)
class PassiveMap:
    """Affine map q_p_dot = fin @ q_fin_dot + measured @ q_m_dot."""

    fin: np.ndarray
    measured: np.ndarray

    def __call__(self, q_fin_dot, q_m_dot) -> np.ndarray:
        return self.fin @ np.asarray(q_fin_dot, dtype=float) + self.measured @ np.asarray(q_m_dot, dtype=float)


@dataclass(frozen=True)
class ReducedJacobian:
    J_A: np.ndarray
    """Map from (l_x_dot, q_B_dot) to (q_o1_dot, q_o2_dot)"""
    condition: float

    def output_velocity(self, q_m_dot) -> np.ndarray:
        return self.J_A @ np.asarray(q_m_dot, dtype=float)


def row_basis(q_fin: np.ndarray) -> np.ndarray:
    """Invertible (..., 8, 8) matrix taking residual rows to the pinned equation order."""
    q_fin = np.asarray(q_fin, dtype=float)
    qo1, qo2 = q_fin[..., 0], q_fin[..., 1]
    basis = np.zeros(q_fin.shape[:-1] + (8, 8))
    basis[..., 0, 2], basis[..., 0, 3] = -np.sin(qo1), np.cos(qo1)
    basis[..., 1, 4], basis[..., 1, 5] = -np.sin(qo2), np.cos(qo2)
    basis[..., 2, 0] = 1.0
    basis[..., 3, 1] = 1.0
    basis[..., 4, 6] = 1.0
    basis[..., 5, 7] = 1.0
    u1, u2 = qo1 + OBLIQUE, qo2 + OBLIQUE
    basis[..., 6, 2], basis[..., 6, 3] = np.cos(u1), np.sin(u1)
    basis[..., 7, 4], basis[..., 7, 5] = np.cos(u2), np.sin(u2)
    return basis


def block_arrays(x: np.ndarray, q_fin: np.ndarray, params: LoopParameters) -> Tuple[np.ndarray, ...]:
    """Stacked blocks (J_Om, J_Op, J_Tm, J_Tp, J_Cm, J_Cp) over leading axes."""
    d_state, d_fin = jacobian_kernel(x, q_fin, params)
    basis = row_basis(np.broadcast_to(q_fin, d_fin.shape[:-2] + (2,)))
    a = basis @ d_state
    f = basis @ d_fin
    return (
        -f[..., :2, :],
        -f[..., 2:, :],
        a[..., :2, MEASURED_COLUMNS],
        a[..., :2, PASSIVE_COLUMNS],
        a[..., 2:, MEASURED_COLUMNS],
        a[..., 2:, PASSIVE_COLUMNS],
    )


def assemble_blocks(state: MechanismState, pose: FingerPose, geom: Geometry) -> JacobianBlocks:
    """Block partition of the differentiated closure equations at a solved state."""
    params = loop_parameters(geom, pose.anthropometry)
    return JacobianBlocks(*block_arrays(state.as_array(), pose.q_fin, params))


def _condition(matrices: np.ndarray) -> np.ndarray:
    finite = np.isfinite(matrices).all(axis=(-2, -1))
    safe = np.where(finite[..., None, None], matrices, np.eye(matrices.shape[-1]))
    with np.errstate(all="ignore"):
        condition = np.linalg.cond(safe)
    return np.where(finite, condition, np.inf)


def eliminate_passive(blocks: JacobianBlocks) -> PassiveMap:
    """Solve the constraint rows for the passive velocities.

    Raises:
        PassiveSingular: if J_Cp is too ill-conditioned to invert.
    """
    condition = float(_condition(blocks.J_Cp))
    if not condition < CONDITION_CAP:
        raise PassiveSingular("Passive-joint block J_Cp is singular", condition)
    fin = np.linalg.solve(blocks.J_Cp, blocks.J_Op)
    measured = -np.linalg.solve(blocks.J_Cp, blocks.J_Cm)
    return PassiveMap(fin=fin, measured=measured)


def reduced_jacobian(blocks: JacobianBlocks) -> ReducedJacobian:
    """Measured-to-output Jacobian after eliminating the passive joints.

    Raises:
        PassiveSingular: if J_Cp cannot be inverted.
        OutputSingular: if the output bracket J_Om - J_Tp J_Cp^-1 J_Op is singular.
    """
    passive = eliminate_passive(blocks)
    left = blocks.J_Om - blocks.J_Tp @ passive.fin
    right = blocks.J_Tm + blocks.J_Tp @ passive.measured
    left_condition = float(_condition(left))
    if not left_condition < CONDITION_CAP:
        raise OutputSingular("Output bracket of the reduced Jacobian is singular", left_condition)
    j_a = np.linalg.solve(left, right)
    return ReducedJacobian(J_A=j_a, condition=float(_condition(j_a)))


def batch_reduced_jacobian(
    x: np.ndarray,
    q_fin: np.ndarray,
    params: LoopParameters,
) -> Tuple[np.ndarray, np.ndarray]:
    """J_A for stacked states.

    Returns:
        (J_A, ok): J_A of shape (..., 2, 2) and a mask that is False wherever
        an inner inversion was singular (J_A is NaN there).
    """
    J_Om, J_Op, J_Tm, J_Tp, J_Cm, J_Cp = block_arrays(x, q_fin, params)
    passive_ok = _condition(J_Cp) < CONDITION_CAP
    J_Cp = np.where(passive_ok[..., None, None], J_Cp, np.eye(6))
    fin = np.linalg.solve(J_Cp, J_Op)
    measured = -np.linalg.solve(J_Cp, J_Cm)
    left = J_Om - J_Tp @ fin
    right = J_Tm + J_Tp @ measured
    ok = passive_ok & (_condition(left) < CONDITION_CAP)
    left = np.where(ok[..., None, None], left, np.eye(2))
    j_a = np.linalg.solve(left, right)
    j_a[~ok] = np.nan
    return j_a, ok


def state_reduced_jacobian(state: MechanismState, pose: FingerPose, geom: Geometry) -> ReducedJacobian:
    return reduced_jacobian(assemble_blocks(state, pose, geom))


def fd_jacobian_oracle(
    pose: FingerPose,
    geom: Geometry,
    h: float = 1e-6,
    state: Optional[MechanismState] = None,
    settings: Optional[SolverSettings] = None,
) -> np.ndarray:
    """Central-difference estimate of d(q_o1, q_o2)/d(l_x, q_B).

    The measured coordinates are clamped at perturbed values and the closure
    is re-solved with the finger angles freed, so this never touches the
    analytic derivatives.
    """
    if not h > 0:
        raise ValueError(f"Finite-difference step must be positive, got {h}")
    settings = settings or SolverSettings(tol_residual=1e-12)
    if state is None:
        state = solve_pose(pose, geom, settings=settings)
    params = loop_parameters(geom, pose.anthropometry)
    base = state.as_array()

    # unknowns: c_1 c_2 q_o1 q_o2 q_D q_G q_K q_N
    free = np.array([base[1], base[2], pose.q_o1, pose.q_o2, base[4], base[5], base[6], base[7]])
    measured = np.array([[base[0], base[3]]] * 4)
    for row, (column, sign) in enumerate(((0, 1), (0, -1), (1, 1), (1, -1))):
        measured[row, column] += sign * h

    def residual(y: np.ndarray) -> np.ndarray:
        x = np.stack(
            np.broadcast_arrays(
                measured[:, 0], y[..., 0], y[..., 1], measured[:, 1],
                y[..., 4], y[..., 5], y[..., 6], y[..., 7],
            ),
            axis=-1,
        )
        return residual_kernel(x, y[..., 2:4], params)

    result = newton_solve(residual, np.tile(free, (4, 1)), settings, angle_columns=slice(2, 8))
    for row in range(4):
        raise_for_status(result, row)
    q_fin = result.x[:, 2:4]
    columns = [(q_fin[0] - q_fin[1]) / (2 * h), (q_fin[2] - q_fin[3]) / (2 * h)]
    return np.stack(columns, axis=-1)
