import math
from enum import Enum
from typing import Optional, Tuple

import attr
import numpy as np
from attr import dataclass

from exosynth.exceptions import GeometryError, NonPositiveComposite

PRIMITIVE_LENGTHS = (
    "L_AB", "L_BC", "L_CD", "L_CI", "L_ED", "L_EF",
    "L_EJ", "L_KB", "L_KH", "L_GH", "L_GF",
)
STATE_FIELDS = ("l_x", "c_1", "c_2", "q_B", "q_D", "q_G", "q_K", "q_N")

# Natural range of motion of the index finger (deg).
NATURAL_MCP_RANGE = (0.0, 85.0)
NATURAL_PIP_RANGE = (0.0, 100.0)
# Range the device is designed and optimized for (deg).
WORKSPACE_MCP_MAX = 80.0
WORKSPACE_PIP_MAX = 90.0

Q_O1_REF = math.pi
_ROM_TOLERANCE = 1e-9


class DbAngle(str, Enum):
    """Direction used for the D->B term of the fourth loop."""

    AS_PRINTED_QK = "as_printed_qK"
    CORRECTED_QB = "corrected_qB"


@dataclass(frozen=True)
class DeviceSpec:
    """Published figures of the index-finger prototype."""

    stroke: float = 50.0
    """Linear actuator stroke (mm)"""
    max_force: float = 40.0
    """Maximum continuous actuator force (N)"""
    max_mcp_torque: float = 1485.0
    """Maximum torque delivered at the MCP joint (N*mm)"""
    max_pip_torque: float = 434.0
    """Maximum torque delivered at the PIP joint (N*mm)"""
    mcp_range: float = WORKSPACE_MCP_MAX
    pip_range: float = WORKSPACE_PIP_MAX
    backdrive_force: float = 31.0
    """Force needed to backdrive the actuator (N)"""
    max_speed: float = 32.0
    """No-load actuator speed (mm/s)"""
    gear_ratio: float = 35.0


DEVICE = DeviceSpec()


@dataclass(frozen=True)
class MechanismState:
    """The eight closure unknowns. Lengths in mm, angles in rad."""

    l_x: float
    c_1: float
    c_2: float
    q_B: float
    q_D: float
    q_G: float
    q_K: float
    q_N: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in STATE_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, values) -> "MechanismState":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(STATE_FIELDS),):
            raise ValueError(f"Expected {len(STATE_FIELDS)} state values, got shape {values.shape}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class Anthropometry:
    l_ML: float
    """Proximal phalange length, MCP to PIP (mm)"""
    l_p2: float
    """Usable intermediate phalange length (mm)"""
    c1_max: float = 50.0
    """Slider travel available on the proximal phalange (mm)"""
    c2_max: float = 40.0
    """Slider travel available on the intermediate phalange (mm)"""

    def __attrs_post_init__(self):
        for name in ("l_ML", "l_p2", "c1_max", "c2_max"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"Anthropometry {name} must be positive, got {value}")


class AnthropometryPreset(Enum):
    """Hand sizes the device was checked against."""

    SMALL = Anthropometry(l_ML=45.0, l_p2=27.0)
    MEDIUM = Anthropometry(l_ML=50.0, l_p2=30.0)
    BIG = Anthropometry(l_ML=55.0, l_p2=34.0)

    @classmethod
    def from_name(cls, name: str) -> "AnthropometryPreset":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            choices = ", ".join(p.name.lower() for p in cls)
            raise ValueError(f"Unknown anthropometry preset {name!r}, expected one of: {choices}")


@dataclass(frozen=True)
class FingerPose:
    """Absolute base-frame orientations of the proximal and intermediate phalanges (rad)."""

    q_o1: float
    q_o2: float
    anthropometry: Anthropometry = AnthropometryPreset.MEDIUM.value

    @property
    def q_fin(self) -> np.ndarray:
        return np.array([self.q_o1, self.q_o2], dtype=float)


@dataclass(frozen=True)
class DerivedSegments:
    """Composite segment lengths used by the loop equations (mm)."""

    l_BD: float
    l_BH: float
    l_HG: float
    l_FD: float
    l_AD: float
    """Housed for completeness, no loop uses it"""


@dataclass(frozen=True)
class Geometry:
    """Constant dimensions of one finger mechanism.

    Lengths are in mm and angles in rad. `seed` is the closure solution at the
    extension pose, used to start continuation when no guess is supplied.
    """

    L_AB: float
    L_BC: float
    L_CD: float
    L_CI: float
    L_ED: float
    L_EF: float
    L_EJ: float
    L_KB: float
    L_KH: float
    L_GH: float
    L_GF: float
    l_act: float
    l_KN: float
    q_KN: float
    l_LK: float
    q_LK: float
    s_BD: int = 1
    s_BH: int = -1
    s_FD: int = 1
    db_angle: DbAngle = attr.ib(default=DbAngle.CORRECTED_QB, converter=DbAngle)
    q_o1_ref: float = Q_O1_REF
    seed: Optional[MechanismState] = None

    def __attrs_post_init__(self):
        for name in PRIMITIVE_LENGTHS:
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise GeometryError(f"Primitive length {name} must be positive, got {value}")
        for name in ("s_BD", "s_BH", "s_FD"):
            if getattr(self, name) not in (1, -1):
                raise GeometryError(f"Sign {name} must be +1 or -1, got {getattr(self, name)}")
        for name in ("l_act", "l_KN", "q_KN", "l_LK", "q_LK", "q_o1_ref"):
            if not math.isfinite(getattr(self, name)):
                raise GeometryError(f"Frame constant {name} is not finite")

    def replace(self, **changes) -> "Geometry":
        """Return a copy with the given fields changed, validated like a new instance."""
        return attr.evolve(self, **changes)

    def primitive_lengths(self) -> dict:
        return {name: getattr(self, name) for name in PRIMITIVE_LENGTHS}

    def finger_pose(
        self,
        theta_mcp: float,
        theta_pip: float,
        anthropometry: Optional[Anthropometry] = None,
    ) -> FingerPose:
        """Pose from anatomical angles in degrees, referenced to this geometry's extension."""
        return anatomical_to_internal(theta_mcp, theta_pip, anthropometry, q_o1_ref=self.q_o1_ref)


def composite_lengths(geom: Geometry) -> DerivedSegments:
    """Compose the loop-equation segments from collinear primitive lengths.

    Points C and D lie on the link through B (l_BD = L_BC + s_BD*L_CD), B lies
    between K and H (l_BH = L_KH + s_BH*L_KB) and F lies on the line through E
    and D (l_FD = L_ED + s_FD*L_EF).

    Raises:
        NonPositiveComposite: if a composite comes out zero or negative.
    """
    l_BD = geom.L_BC + geom.s_BD * geom.L_CD
    l_BH = geom.L_KH + geom.s_BH * geom.L_KB
    l_HG = geom.L_GH
    l_FD = geom.L_ED + geom.s_FD * geom.L_EF
    l_AD = geom.L_AB + l_BD
    for name, value in (("l_BD", l_BD), ("l_BH", l_BH), ("l_HG", l_HG), ("l_FD", l_FD), ("l_AD", l_AD)):
        if value <= 0:
            raise NonPositiveComposite(name, value)
    return DerivedSegments(l_BD=l_BD, l_BH=l_BH, l_HG=l_HG, l_FD=l_FD, l_AD=l_AD)


def anatomical_to_internal(
    theta_mcp: float,
    theta_pip: float,
    anthropometry: Optional[Anthropometry] = None,
    q_o1_ref: float = Q_O1_REF,
) -> FingerPose:
    """Convert anatomical flexion angles (deg) to absolute phalange orientations (rad).

    Flexion rotates each phalange clockwise in the base frame:
    q_o1 = q_o1_ref - theta_MCP and q_o2 = q_o1 - theta_PIP.
    """
    q_o1 = q_o1_ref - math.radians(theta_mcp)
    q_o2 = q_o1 - math.radians(theta_pip)
    if anthropometry is None:
        return FingerPose(q_o1=q_o1, q_o2=q_o2)
    return FingerPose(q_o1=q_o1, q_o2=q_o2, anthropometry=anthropometry)


def internal_to_anatomical(pose: FingerPose, q_o1_ref: float = Q_O1_REF) -> Tuple[float, float]:
    """Inverse of `anatomical_to_internal`, returns (theta_MCP, theta_PIP) in degrees."""
    theta_mcp = math.degrees(q_o1_ref - pose.q_o1)
    theta_pip = math.degrees(pose.q_o1 - pose.q_o2)
    return theta_mcp, theta_pip


def validate_rom(pose: FingerPose, q_o1_ref: float = Q_O1_REF) -> Tuple[float, float]:
    """Check a pose against the natural range of motion.

    Returns:
        The anatomical angles (deg) when they are inside the range.

    Raises:
        ValueError: if either joint is outside its natural range.
    """
    theta_mcp, theta_pip = internal_to_anatomical(pose, q_o1_ref)
    for joint, value, (low, high) in (
        ("MCP", theta_mcp, NATURAL_MCP_RANGE),
        ("PIP", theta_pip, NATURAL_PIP_RANGE),
    ):
        if not (low - _ROM_TOLERANCE <= value <= high + _ROM_TOLERANCE):
            raise ValueError(f"{joint} angle {value:.3f} deg outside natural range [{low:g}, {high:g}]")
    return theta_mcp, theta_pip
