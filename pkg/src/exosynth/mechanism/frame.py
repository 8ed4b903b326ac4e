"""Frame constants rebuilt from a chosen extension configuration.

At the extension pose (theta_MCP = theta_PIP = 0, l_x = 0) both phalanges
point along q_o1_ref. Fixing c1, q_B, the actuator axis q_N and the actuator
body length leaves Loop 3 and Loop 4 with two unknowns each; the remaining
fixed vectors (L->K and K->N) then follow from Loops 2 and 1.
"""

import cmath
import math

from attr import dataclass

from exosynth.exceptions import GeometryError

from .geometry import Anthropometry, AnthropometryPreset, DbAngle, Geometry, MechanismState
from .loops import loop_parameters


@dataclass(frozen=True)
class ExtensionChoice:
    """Free quantities of the extension configuration. Lengths in mm, angles in rad."""

    c_1: float
    q_B: float
    q_N: float
    l_act: float
    c2_root: int = 1
    """Root of the Loop 3 quadratic in c2, +1 or -1"""
    elbow: int = -1
    """Side of the Loop 4 circle intersection, +1 or -1"""

    def __attrs_post_init__(self):
        if self.c2_root not in (1, -1) or self.elbow not in (1, -1):
            raise ValueError(f"Branch selectors must be +1 or -1, got {self.c2_root} and {self.elbow}")
        if not self.l_act > 0:
            raise ValueError(f"Actuator length must be positive, got {self.l_act}")

    @classmethod
    def from_degrees(cls, c_1: float, q_B: float, q_N: float, l_act: float, **branches) -> "ExtensionChoice":
        return cls(c_1=c_1, q_B=math.radians(q_B), q_N=math.radians(q_N), l_act=l_act, **branches)


def extension_frame(
    geom: Geometry,
    choice: ExtensionChoice,
    anthropometry: Anthropometry = AnthropometryPreset.MEDIUM.value,
) -> Geometry:
    """Copy of `geom` with frame constants and seed closing the loops at `choice`.

    Raises:
        GeometryError: if Loop 3 or Loop 4 cannot close at the extension pose.
    """
    p = {key: float(value) for key, value in loop_parameters(geom, anthropometry).items()}
    e1 = cmath.exp(1j * geom.q_o1_ref)
    eB = cmath.exp(1j * choice.q_B)
    c1 = choice.c_1

    # Loop 3 minus Loop 2: l_DEJ*eD = w - c2*e1, with both phalanges along e1
    w = (p["l_BCI"] - p["l_BD"]) * eB + (c1 - p["l_ML"]) * e1
    local = w / e1
    disc = p["l_DEJ"] ** 2 - local.imag ** 2
    if disc < 0:
        raise GeometryError(f"Loop 3 cannot close at extension with c1 = {c1:g} mm")
    c2 = local.real + choice.c2_root * math.sqrt(disc)
    eD = (w - c2 * e1) / p["l_DEJ"]

    # Loop 4: a*eK + b*eG = v
    as_printed = geom.db_angle is DbAngle.AS_PRINTED_QK
    a = p["l_BHG"] + (p["l_BD"] if as_printed else 0.0)
    b = p["l_GF"]
    v = -p["l_FD"] * eD - (0.0 if as_printed else p["l_BD"] * eB)
    reach = abs(v)
    if not abs(a - b) <= reach <= a + b:
        raise GeometryError(f"Loop 4 cannot close at extension, |v| = {reach:.6g} mm outside [{abs(a - b):.6g}, {a + b:.6g}]")
    alpha = math.acos(min(1.0, max(-1.0, (a * a + reach * reach - b * b) / (2 * a * reach))))
    q_K = cmath.phase(v) + choice.elbow * alpha
    eK = cmath.exp(1j * q_K)
    eG = (v - a * eK) / b

    e_LK = -(p["l_BK"] * eK + p["l_BCI"] * eB + c1 * e1)
    e_KN = -(choice.l_act * cmath.exp(1j * choice.q_N) + p["l_AB"] * eB + p["l_BK"] * eK)
    seed = MechanismState(
        l_x=0.0, c_1=c1, c_2=c2, q_B=choice.q_B, q_D=cmath.phase(eD),
        q_G=cmath.phase(eG), q_K=q_K, q_N=choice.q_N,
    )
    return geom.replace(
        l_act=choice.l_act,
        l_KN=abs(e_KN),
        q_KN=cmath.phase(e_KN),
        l_LK=abs(e_LK),
        q_LK=cmath.phase(e_LK),
        seed=seed,
    )
