"""Force transmission from the linear actuator to the finger joints.

The reduced Jacobian gives the torques conjugate to the absolute phalange
angles (q_o1, q_o2). They are reported conjugate to the anatomical flexion
angles, theta_MCP = q_o1_ref - q_o1 and theta_PIP = q_o1 - q_o2, so a
positive torque flexes the joint.
"""

import logging
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from attr import dataclass

from exosynth.exceptions import Indeterminate, OutputSingular, RatioUndefined
from exosynth.mechanism.geometry import DEVICE, Anthropometry, Geometry
from exosynth.mechanism.loops import loop_parameters

from .differential import CONDITION_CAP, ReducedJacobian, batch_reduced_jacobian
from .pose_solver import SolverSettings, SolveStatus, grid_walk, walk_solve

logger = logging.getLogger(__name__)

TORQUE_FLOOR = 1e-12
# d(theta_MCP, theta_PIP) = ANATOMICAL @ d(q_o1, q_o2)
ANATOMICAL = np.array([[-1.0, 0.0], [1.0, -1.0]])


class GraspStability(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class ActuatorWrench:
    f_ac: float
    """Linear actuator force (N)"""
    tau_B: float = 0.0
    """Torque at the measured joint B (N*mm), zero in every statics computation"""

    def __attrs_post_init__(self):
        if self.tau_B != 0.0:
            raise ValueError(f"Torque at the measured joint must be zero, got {self.tau_B}")

    def as_array(self) -> np.ndarray:
        return np.array([self.f_ac, self.tau_B], dtype=float)


@dataclass(frozen=True)
class JointTorques:
    tau_1: float
    """MCP torque (N*mm), positive flexes"""
    tau_2: float
    """PIP torque (N*mm), positive flexes"""
    tau_o1: float = float("nan")
    """Torque conjugate to q_o1, straight from the transposed Jacobian"""
    tau_o2: float = float("nan")

    def as_array(self) -> np.ndarray:
        return np.array([self.tau_1, self.tau_2], dtype=float)


def anatomical_torques(tau_internal: np.ndarray) -> np.ndarray:
    """Map torques conjugate to (q_o1, q_o2) onto (theta_MCP, theta_PIP), batched."""
    tau_internal = np.asarray(tau_internal, dtype=float)
    # tau_internal = ANATOMICAL.T @ tau_anatomical
    tau_o1, tau_o2 = tau_internal[..., 0], tau_internal[..., 1]
    return np.stack([-tau_o1 - tau_o2, -tau_o2], axis=-1)


def joint_torques(J_A: ReducedJacobian, wrench: ActuatorWrench) -> JointTorques:
    """Finger torques produced by the actuator wrench, tau_fin = J_A^-T tau_m.

    Raises:
        OutputSingular: if J_A cannot be inverted.
    """
    if not J_A.condition < CONDITION_CAP:
        raise OutputSingular("Reduced Jacobian is singular, torques are unbounded", J_A.condition)
    tau_internal = np.linalg.solve(J_A.J_A.T, wrench.as_array())
    tau_1, tau_2 = anatomical_torques(tau_internal)
    return JointTorques(
        tau_1=float(tau_1), tau_2=float(tau_2),
        tau_o1=float(tau_internal[0]), tau_o2=float(tau_internal[1]),
    )


def power_balance(J_A: ReducedJacobian, wrench: ActuatorWrench, q_m_dot) -> float:
    """Output power minus input power, zero up to rounding."""
    q_m_dot = np.asarray(q_m_dot, dtype=float)
    torques = joint_torques(J_A, wrench)
    theta_dot = ANATOMICAL @ J_A.output_velocity(q_m_dot)
    return float(torques.as_array() @ theta_dot - wrench.as_array() @ q_m_dot)


def grasp_stability(torques: JointTorques) -> GraspStability:
    """Stable when both torques drive the finger the same way.

    Raises:
        Indeterminate: if either torque is numerically zero.
    """
    if abs(torques.tau_1) < TORQUE_FLOOR or abs(torques.tau_2) < TORQUE_FLOOR:
        raise Indeterminate(f"Torque sign undefined for ({torques.tau_1:.3e}, {torques.tau_2:.3e}) N*mm")
    if np.sign(torques.tau_1) == np.sign(torques.tau_2):
        return GraspStability.STABLE
    return GraspStability.UNSTABLE


def torque_ratio(torques: JointTorques) -> float:
    if torques.tau_2 == 0:
        raise RatioUndefined(f"PIP torque is zero (MCP torque {torques.tau_1:.3e} N*mm)")
    return torques.tau_1 / torques.tau_2


def actuator_velocity_limits(
    J_A: ReducedJacobian,
    max_speed: float = DEVICE.max_speed,
) -> np.ndarray:
    """Anatomical joint speeds (rad/s) with the actuator at full speed and B held."""
    q_fin_dot = J_A.output_velocity([max_speed, 0.0])
    return ANATOMICAL @ q_fin_dot


def workspace_torques(
    geom: Geometry,
    anthropometry: Anthropometry,
    mcp_values: Sequence[float],
    pip_values: Sequence[float],
    f_ac: float = 1.0,
    settings: Optional[SolverSettings] = None,
) -> pd.DataFrame:
    """Per-pose states and anatomical torques over an MCP x PIP grid (deg).

    Poses where the closure or an inversion fails get NaN values and
    `ok = False`.
    """
    settings = settings or SolverSettings()
    if geom.seed is None:
        raise ValueError("Geometry has no extension seed")
    walk = grid_walk(mcp_values, pip_values, settings.max_substep)
    params = loop_parameters(geom, anthropometry)
    states, status = walk_solve(walk, params, geom.seed.as_array()[None], geom.q_o1_ref, settings)

    rows = []
    for s, step in enumerate(walk):
        if step.grid_index is None:
            continue
        x = states[s, 0]
        q_o1 = geom.q_o1_ref - np.radians(step.theta_mcp)
        q_fin = np.array([q_o1, q_o1 - np.radians(step.theta_pip)])
        solved = status[s, 0] == SolveStatus.CONVERGED
        j_a, ok = batch_reduced_jacobian(x, q_fin, params)
        ok = bool(solved and ok)
        if ok:
            tau = anatomical_torques(np.linalg.solve(j_a.T, [f_ac, 0.0]))
        else:
            tau = np.full(2, np.nan)
        rows.append({
            "theta_mcp": step.theta_mcp,
            "theta_pip": step.theta_pip,
            "l_x": x[0] if solved else np.nan,
            "c_1": x[1] if solved else np.nan,
            "c_2": x[2] if solved else np.nan,
            "tau_1": tau[0],
            "tau_2": tau[1],
            "ok": ok,
        })
    frame = pd.DataFrame(rows).sort_values(["theta_mcp", "theta_pip"], ignore_index=True)
    frame["ratio"] = frame["tau_1"] / frame["tau_2"]
    frame.attrs["f_ac"] = f_ac
    return frame


@dataclass(frozen=True)
class TorqueDiagnostic:
    max_tau_1: float
    max_tau_2: float
    target_tau_1: float
    target_tau_2: float
    band: float

    @property
    def tau_1_reproduced(self) -> bool:
        return abs(self.max_tau_1 - self.target_tau_1) <= self.band * self.target_tau_1

    @property
    def tau_2_reproduced(self) -> bool:
        return abs(self.max_tau_2 - self.target_tau_2) <= self.band * self.target_tau_2


def torque_diagnostics(torques: pd.DataFrame, f_ac: float = DEVICE.max_force, band: float = 0.25) -> TorqueDiagnostic:
    """Compare workspace-maximum torques against the prototype's published maxima.

    `torques` is a `workspace_torques` frame computed at any force; it is
    rescaled to `f_ac` since the torques are linear in the force.
    """
    valid = torques[torques["ok"]]
    if valid.empty:
        raise ValueError("No solvable pose in the torque table")
    scale = f_ac / _frame_force(torques)
    diagnostic = TorqueDiagnostic(
        max_tau_1=float(valid["tau_1"].abs().max() * scale),
        max_tau_2=float(valid["tau_2"].abs().max() * scale),
        target_tau_1=DEVICE.max_mcp_torque,
        target_tau_2=DEVICE.max_pip_torque,
        band=band,
    )
    for joint, value, target, ok in (
        ("MCP", diagnostic.max_tau_1, diagnostic.target_tau_1, diagnostic.tau_1_reproduced),
        ("PIP", diagnostic.max_tau_2, diagnostic.target_tau_2, diagnostic.tau_2_reproduced),
    ):
        if not ok:
            logger.warning(f"max {joint} torque {value:.1f} N*mm at {f_ac:g} N is outside {band:.0%} of {target:g} N*mm")
    return diagnostic


def _frame_force(torques: pd.DataFrame) -> float:
    return float(torques.attrs.get("f_ac", 1.0))
