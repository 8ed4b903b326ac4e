"""Quasi-static grasp simulation of the underactuated finger.

At a fixed actuator stroke the closure leaves the finger one degree of
freedom. Each step walks downhill along that stroke curve from the previous
pose, minimizing the torsional joint spring energy, stiff penalties at the
joint end stops and a quadratic penalty on phalange penetration into the
object; contact forces are read from the penalty.

The actuator is position driven up to its force limit. The force it has to
hold is the derivative of the equilibrium energy along the stroke; once that
reaches the limit while closing, the actuator stalls and the stroke stays
put until the schedule turns back.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import attr
import numpy as np
import pandas as pd
from attr import dataclass
from scipy.optimize import brentq, minimize_scalar

from exosynth.exceptions import ExosynthError, NoEquilibrium
from exosynth.kinematics.differential import state_reduced_jacobian
from exosynth.kinematics.pose_solver import SolverSettings, SolveStatus, newton_solve
from exosynth.kinematics.statics import ActuatorWrench, GraspStability, grasp_stability, joint_torques
from exosynth.mechanism.geometry import (
    DEVICE,
    NATURAL_MCP_RANGE,
    NATURAL_PIP_RANGE,
    Anthropometry,
    AnthropometryPreset,
    FingerPose,
    Geometry,
    MechanismState,
)
from exosynth.mechanism.loops import loop_parameters, residual_kernel

from .contact import CONTACT_TOLERANCE, PHALANGES, ContactSet, ObjectShape, detect_contact, line_side, phalange_segments

logger = logging.getLogger(__name__)

CONTACT_STIFFNESS = 100.0
"""Penalty stiffness per contact (N/mm)"""
STOP_STIFFNESS = 1e7
"""Stiffness of the joint end stops (N*mm/rad)"""
DESCENT_STEP = math.radians(0.5)
"""PIP increment of the downhill walk along a stroke curve (rad)"""
STROKE_SUBSTEP = 0.05
"""Largest stroke increment between two equilibria (mm)"""
MAX_STEP_CUTS = 8
"""Halvings of a stroke increment before a pass through the object is fatal"""
FORCE_STEP = 1e-6
"""Stroke half step of the central difference giving the actuator force (mm)"""
_MAX_WALK = 1000
_INFEASIBLE_ENERGY = 1e12


@dataclass(frozen=True)
class FingerImpedance:
    k_mcp: float = 50.0
    """MCP torsional stiffness (N*mm/rad)"""
    k_pip: float = 50.0
    rest_mcp: float = 0.0
    """Spring rest angle (rad), extension by default"""
    rest_pip: float = 0.0
    mcp_range: Tuple[float, float] = tuple(math.radians(v) for v in NATURAL_MCP_RANGE)
    """End stops of the MCP flexion (rad)"""
    pip_range: Tuple[float, float] = tuple(math.radians(v) for v in NATURAL_PIP_RANGE)
    k_stop: float = STOP_STIFFNESS

    def __attrs_post_init__(self):
        if not self.k_mcp > 0 or not self.k_pip > 0:
            raise ValueError(f"Joint stiffnesses must be positive, got ({self.k_mcp}, {self.k_pip})")
        if not self.k_stop > 0:
            raise ValueError(f"End stop stiffness must be positive, got {self.k_stop}")
        for name, (low, high) in (("MCP", self.mcp_range), ("PIP", self.pip_range)):
            if not low < high:
                raise ValueError(f"{name} range must be increasing, got ({low}, {high})")

    @staticmethod
    def _overshoot(theta: float, bounds: Tuple[float, float]) -> float:
        low, high = bounds
        return max(low - theta, 0.0, theta - high)

    def energy(self, theta_mcp: float, theta_pip: float) -> float:
        spring = 0.5 * self.k_mcp * (theta_mcp - self.rest_mcp) ** 2 + 0.5 * self.k_pip * (theta_pip - self.rest_pip) ** 2
        stops = self._overshoot(theta_mcp, self.mcp_range) ** 2 + self._overshoot(theta_pip, self.pip_range) ** 2
        return spring + 0.5 * self.k_stop * stops


@dataclass(frozen=True)
class EquilibriumStep:
    l_x: float
    state: MechanismState
    pose: FingerPose
    theta_mcp: float
    """Anatomical flexion (rad)"""
    theta_pip: float
    contacts: ContactSet
    forces: Dict[str, float]
    """Normal contact force per phalange (N), never negative"""
    energy: float
    actuator_force: float = 0.0
    """Force the actuator holds at this stroke (N)"""
    stalled: bool = False
    """The actuator hit its force limit before reaching the commanded stroke"""

    @property
    def curve_point(self) -> np.ndarray:
        s = self.state
        return np.array([s.c_1, s.c_2, self.pose.q_o1, s.q_B, s.q_D, s.q_G, s.q_K, s.q_N])


class _StrokeCurve:
    """Closure-feasible poses at one actuator stroke, parametrized by the PIP flexion."""

    def __init__(
        self,
        geom: Geometry,
        anthropometry: Anthropometry,
        l_x: float,
        settings: SolverSettings,
    ):
        self.geom = geom
        self.anthropometry = anthropometry
        self.l_x = l_x
        self.settings = settings
        self.params = loop_parameters(geom, anthropometry)

    def _residual(self, y: np.ndarray, theta_pip: float) -> np.ndarray:
        # unknowns: c_1 c_2 q_o1 q_B q_D q_G q_K q_N
        l_x = np.full(y.shape[:-1], self.l_x)
        x = np.stack([l_x, y[..., 0], y[..., 1], y[..., 3], y[..., 4], y[..., 5], y[..., 6], y[..., 7]], axis=-1)
        q_fin = np.stack([y[..., 2], y[..., 2] - theta_pip], axis=-1)
        return residual_kernel(x, q_fin, self.params)

    def solve(self, theta_pip: float, start: np.ndarray) -> Optional[Tuple[MechanismState, FingerPose]]:
        result = newton_solve(
            lambda y: self._residual(y, theta_pip), start[None], self.settings, angle_columns=slice(2, 8)
        )
        if result.status[0] != SolveStatus.CONVERGED:
            return None
        y = result.x[0]
        state = MechanismState.from_array([self.l_x, y[0], y[1], y[3], y[4], y[5], y[6], y[7]])
        pose = FingerPose(q_o1=float(y[2]), q_o2=float(y[2] - theta_pip), anthropometry=self.anthropometry)
        return state, pose


@dataclass(frozen=True)
class _Model:
    geom: Geometry
    anthropometry: Anthropometry
    obj: Optional[ObjectShape]
    impedance: FingerImpedance
    contact_stiffness: float
    settings: SolverSettings

    def curve(self, l_x: float) -> _StrokeCurve:
        return _StrokeCurve(self.geom, self.anthropometry, l_x, self.settings)

    def evaluate(self, curve: _StrokeCurve, theta_pip: float, start: np.ndarray) -> Optional[EquilibriumStep]:
        solved = curve.solve(theta_pip, start)
        if solved is None:
            return None
        state, pose = solved
        theta_mcp = self.geom.q_o1_ref - pose.q_o1
        contacts = detect_contact(pose, self.obj, q_o1_ref=self.geom.q_o1_ref)
        forces = {name: self.contact_stiffness * contacts.penetration(name) for name in PHALANGES}
        energy = self.impedance.energy(theta_mcp, theta_pip)
        energy += sum(0.5 * f * f / self.contact_stiffness for f in forces.values())
        return EquilibriumStep(
            l_x=curve.l_x,
            state=state,
            pose=pose,
            theta_mcp=float(theta_mcp),
            theta_pip=float(theta_pip),
            contacts=contacts,
            forces=forces,
            energy=float(energy),
        )

    def actuator_force(self, step: EquilibriumStep) -> float:
        # at an energy minimum along the curve the stroke derivative can be
        # taken with the PIP flexion held fixed
        ahead = self.evaluate(self.curve(step.l_x + FORCE_STEP), step.theta_pip, step.curve_point)
        behind = self.evaluate(self.curve(step.l_x - FORCE_STEP), step.theta_pip, step.curve_point)
        if ahead is None or behind is None:
            return math.nan
        return (ahead.energy - behind.energy) / (2 * FORCE_STEP)


def _single_model(
    geom: Geometry,
    anthropometry: Anthropometry,
    obj: Optional[ObjectShape],
    impedance: FingerImpedance,
    contact_stiffness: float,
    settings: Optional[SolverSettings],
) -> _Model:
    if not contact_stiffness > 0:
        raise ValueError(f"Contact stiffness must be positive, got {contact_stiffness}")
    return _Model(
        geom=geom,
        anthropometry=anthropometry,
        obj=obj,
        impedance=impedance,
        contact_stiffness=contact_stiffness,
        settings=settings or SolverSettings(),
    )


def _descend(model: _Model, curve: _StrokeCurve, warm: EquilibriumStep) -> EquilibriumStep:
    """Local energy minimum reached by walking downhill along `curve` from `warm`."""
    neighbours = [model.evaluate(curve, warm.theta_pip + sign * DESCENT_STEP, warm.curve_point) for sign in (1, -1)]
    downhill = [(step, sign) for step, sign in zip(neighbours, (1, -1)) if step is not None and step.energy < warm.energy]
    current = warm
    if downhill:
        following, direction = min(downhill, key=lambda pair: pair[0].energy)
        for _ in range(_MAX_WALK):
            if following is None or following.energy >= current.energy:
                break
            current = following
            following = model.evaluate(curve, current.theta_pip + direction * DESCENT_STEP, current.curve_point)

    start = current.curve_point

    def objective(theta_pip: float) -> float:
        step = model.evaluate(curve, theta_pip, start)
        return _INFEASIBLE_ENERGY if step is None else step.energy

    bounds = (current.theta_pip - DESCENT_STEP, current.theta_pip + DESCENT_STEP)
    result = minimize_scalar(objective, bounds=bounds, method="bounded", options={"xatol": 1e-8})
    if result.success and result.fun < current.energy:
        refined = model.evaluate(curve, float(result.x), start)
        if refined is not None and refined.energy < current.energy:
            return refined
    return current


def _equilibrium(model: _Model, l_x: float, previous: EquilibriumStep) -> EquilibriumStep:
    curve = model.curve(l_x)
    warm = model.evaluate(curve, previous.theta_pip, previous.curve_point)
    if warm is None:
        raise NoEquilibrium(f"Previous PIP flexion {math.degrees(previous.theta_pip):.2f} deg does not close at l_x = {l_x:.4f} mm")
    best = _descend(model, curve, warm)
    return attr.evolve(best, actuator_force=model.actuator_force(best))


def equilibrium_step(
    l_x: float,
    previous: EquilibriumStep,
    obj: Optional[ObjectShape],
    impedance: FingerImpedance,
    geom: Geometry,
    anthropometry: Optional[Anthropometry] = None,
    contact_stiffness: float = CONTACT_STIFFNESS,
    settings: Optional[SolverSettings] = None,
) -> EquilibriumStep:
    """Equilibrium pose at stroke `l_x`, reached by continuation from the previous step.

    The previous PIP flexion is re-closed at the new stroke and the pose then
    slides downhill along the stroke curve to the nearest energy minimum, so
    the accepted pose never has more energy than that warm start.

    Raises:
        NoEquilibrium: if the previous pose does not close at this stroke.
    """
    model = _single_model(geom, anthropometry or previous.pose.anthropometry, obj, impedance, contact_stiffness, settings)
    return _equilibrium(model, l_x, previous)


def closed_step(
    l_x: float,
    theta_pip: float,
    near: EquilibriumStep,
    obj: Optional[ObjectShape],
    impedance: FingerImpedance,
    geom: Geometry,
    anthropometry: Optional[Anthropometry] = None,
    contact_stiffness: float = CONTACT_STIFFNESS,
    settings: Optional[SolverSettings] = None,
) -> Optional[EquilibriumStep]:
    """Pose at stroke `l_x` with PIP flexion `theta_pip` (rad) continued from `near`, None if it does not close."""
    model = _single_model(geom, anthropometry or near.pose.anthropometry, obj, impedance, contact_stiffness, settings)
    return model.evaluate(model.curve(l_x), theta_pip, near.curve_point)


def passed_through(previous: EquilibriumStep, step: EquilibriumStep, obj: Optional[ObjectShape], q_o1_ref: float) -> Optional[str]:
    """Phalange whose line swept over the object's interior point between `previous` and `step`."""
    if obj is None:
        return None
    before = phalange_segments(previous.pose, q_o1_ref)
    after = phalange_segments(step.pose, q_o1_ref)
    inside = obj.interior_point
    for name in PHALANGES:
        side_before, t_before = line_side(inside, before[name])
        side_after, t_after = line_side(inside, after[name])
        if side_before != side_after and 0.0 < t_before < 1.0 and 0.0 < t_after < 1.0:
            return name
    return None


def _extension_step(model: _Model) -> EquilibriumStep:
    geom = model.geom
    if geom.seed is None:
        raise ValueError("Geometry has no extension seed")
    pose = geom.finger_pose(0.0, 0.0, model.anthropometry)
    contacts = detect_contact(pose, model.obj, q_o1_ref=geom.q_o1_ref)
    if any(contacts.penetration(name) > CONTACT_TOLERANCE for name in PHALANGES):
        raise ValueError("Object penetrates the extended finger")
    return EquilibriumStep(
        l_x=geom.seed.l_x,
        state=geom.seed,
        pose=pose,
        theta_mcp=0.0,
        theta_pip=0.0,
        contacts=contacts,
        forces={name: 0.0 for name in PHALANGES},
        energy=model.impedance.energy(0.0, 0.0),
    )


def _clean_step(model: _Model, l_x: float, previous: EquilibriumStep, cuts: int = 0) -> EquilibriumStep:
    """Equilibrium at `l_x`, halving the stroke increment while a phalange passes through the object."""
    step = _equilibrium(model, l_x, previous)
    name = passed_through(previous, step, model.obj, model.geom.q_o1_ref)
    if name is None:
        return step
    if cuts >= MAX_STEP_CUTS:
        raise NoEquilibrium(
            f"The {name} phalange passes through the object between l_x = {previous.l_x:.6f} and {l_x:.6f} mm"
        )
    logger.debug(f"{name} phalange crossed the object towards l_x {l_x:.6f} mm, halving the increment")
    middle = _clean_step(model, 0.5 * (previous.l_x + l_x), previous, cuts + 1)
    return _clean_step(model, l_x, middle, cuts + 1)


def _stall(model: _Model, previous: EquilibriumStep, l_x: float, max_force: float) -> EquilibriumStep:
    """Equilibrium at the stroke in (previous.l_x, l_x] where the actuator force reaches `max_force`."""

    def excess(stroke: float) -> float:
        return _equilibrium(model, stroke, previous).actuator_force - max_force

    if not previous.actuator_force < max_force or not excess(l_x) > 0:
        return attr.evolve(previous, stalled=True)
    stroke = brentq(excess, previous.l_x, l_x, xtol=1e-9)
    return attr.evolve(_equilibrium(model, stroke, previous), stalled=True)


def _advance(
    model: _Model, previous: EquilibriumStep, target: float, max_force: float, substep: float
) -> EquilibriumStep:
    """Move the actuator from `previous` towards `target` in increments of at most `substep`."""
    closing = target > previous.l_x
    if previous.stalled and closing:
        return previous
    start = previous.l_x
    if abs(target - start) < 1e-12:
        return previous
    count = max(1, math.ceil(abs(target - start) / substep - 1e-9))
    for j in range(1, count + 1):
        l_x = start + (target - start) * j / count
        step = _clean_step(model, l_x, previous)
        if closing and step.actuator_force > max_force:
            logger.debug(f"actuator stalls at {max_force:g} N before l_x {l_x:.4f} mm")
            return _stall(model, previous, l_x, max_force)
        previous = step
    return attr.evolve(previous, stalled=False)


@dataclass(frozen=True)
class GraspTrace:
    steps: List[EquilibriumStep]
    stability: Optional[GraspStability] = None
    """Stability of the actuator-transmitted torques at the final pose"""
    targets: Tuple[float, ...] = ()
    """Commanded stroke of each step (mm)"""

    def __len__(self) -> int:
        return len(self.steps)

    def to_frame(self) -> pd.DataFrame:
        columns = [
            "step", "target", "l_x", "theta_mcp", "theta_pip", "F_proximal", "F_intermediate",
            "gap_proximal", "gap_intermediate", "energy", "f_ac", "stalled",
        ]
        targets = self.targets or tuple(step.l_x for step in self.steps)
        rows = [
            {
                "step": k,
                "target": target,
                "l_x": step.l_x,
                "theta_mcp": math.degrees(step.theta_mcp),
                "theta_pip": math.degrees(step.theta_pip),
                "F_proximal": step.forces["proximal"],
                "F_intermediate": step.forces["intermediate"],
                "gap_proximal": step.contacts.gaps["proximal"],
                "gap_intermediate": step.contacts.gaps["intermediate"],
                "energy": step.energy,
                "f_ac": step.actuator_force,
                "stalled": step.stalled,
            }
            for k, (step, target) in enumerate(zip(self.steps, targets))
        ]
        return pd.DataFrame(rows, columns=columns)

    def first_contact_stroke(self, phalange: str) -> Optional[float]:
        """Stroke (mm) of the first step where `phalange` touches the object."""
        if phalange not in PHALANGES:
            raise ValueError(f"Unknown phalange {phalange!r}, expected one of {', '.join(PHALANGES)}")
        for step in self.steps:
            if phalange in step.contacts.active:
                return step.l_x
        return None


def stroke_schedule(start: float, stop: float, step: float) -> np.ndarray:
    """Evenly spaced strokes from `start` to `stop` inclusive; `stop` may be below `start`."""
    if not step > 0:
        raise ValueError(f"Stroke step must be positive, got {step}")
    count = int(math.floor(abs(stop - start) / step + 1e-9))
    values = start + math.copysign(step, stop - start) * np.arange(count + 1)
    if abs(stop - values[-1]) > 1e-9:
        values = np.append(values, stop)
    return values


def final_stability(step: EquilibriumStep, geom: Geometry) -> Optional[GraspStability]:
    try:
        torques = joint_torques(state_reduced_jacobian(step.state, step.pose, geom), ActuatorWrench(f_ac=1.0))
        return grasp_stability(torques)
    except ExosynthError as e:
        logger.debug(f"no stability verdict at the final pose: {e}")
        return None


def simulate_grasp(
    geom: Geometry,
    anthropometry: Optional[Anthropometry] = None,
    impedance: Optional[FingerImpedance] = None,
    obj: Optional[ObjectShape] = None,
    schedule: Sequence[float] = (),
    contact_stiffness: float = CONTACT_STIFFNESS,
    settings: Optional[SolverSettings] = None,
    max_force: float = DEVICE.max_force,
    substep: float = STROKE_SUBSTEP,
) -> GraspTrace:
    """Drive the actuator through `schedule` (mm) and record poses and contact forces.

    The schedule has to start at the extension stroke of `geom`. Between two
    schedule entries the stroke moves in increments of at most `substep`; an
    increment over which a phalange ends up across the object is halved until
    it no longer does. While closing, the actuator stalls where holding the
    stroke takes more than `max_force` (N) and resumes once the schedule
    returns below the stall stroke.

    Raises:
        NoEquilibrium: with `path_index` set to the failing schedule step.
    """
    if not max_force > 0:
        raise ValueError(f"Actuator force limit must be positive, got {max_force}")
    if not substep > 0:
        raise ValueError(f"Stroke substep must be positive, got {substep}")
    model = _single_model(
        geom,
        anthropometry or AnthropometryPreset.MEDIUM.value,
        obj,
        impedance or FingerImpedance(),
        contact_stiffness,
        settings,
    )
    schedule = [float(value) for value in schedule]
    if not schedule:
        return GraspTrace(steps=[])
    previous = _extension_step(model)
    if abs(schedule[0] - previous.l_x) > 1e-6:
        raise ValueError(f"Schedule must start at the extension stroke {previous.l_x:g} mm, got {schedule[0]:g}")

    steps: List[EquilibriumStep] = []
    for k, target in enumerate(schedule):
        try:
            previous = _advance(model, previous, target, max_force, substep)
        except NoEquilibrium as e:
            raise e.at_index(k)
        steps.append(previous)
        if previous.contacts.active:
            logger.debug(f"step {k}: l_x {previous.l_x:.3f} mm, contacts {', '.join(previous.contacts.active)}")
    stalls = sum(step.stalled for step in steps)
    logger.info(f"simulated {len(steps)} strokes" + (f", actuator stalled on {stalls}" if stalls else ""))
    return GraspTrace(steps=steps, stability=final_stability(steps[-1], geom), targets=tuple(schedule))
