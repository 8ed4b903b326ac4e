"""Vector-loop closure equations of the finger mechanism.

Each loop is a planar vector sum written as a complex number. The residual
vector interleaves real and imaginary parts in the fixed order
(L1x, L1y, L2x, L2y, L3x, L3y, L4x, L4y); the unknowns are ordered as
`STATE_FIELDS` and the finger coordinates as (q_o1, q_o2).

The kernels take stacked arrays and broadcast over any leading axes, so the
same code evaluates one configuration, a batch of candidate geometries or a
stencil of perturbed states.
"""

from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from .geometry import (
    Anthropometry,
    DbAngle,
    FingerPose,
    Geometry,
    MechanismState,
    composite_lengths,
)

# Residual8: array of shape (8,), mm.
N_RESIDUALS = 8
N_UNKNOWNS = 8

LoopParameters = Dict[str, np.ndarray]


def loop_parameters(geom: Geometry, anthropometry: Anthropometry) -> LoopParameters:
    """Flatten a geometry and hand into the constants the loop kernels read."""
    derived = composite_lengths(geom)
    return {
        "l_act": np.float64(geom.l_act),
        "l_AB": np.float64(geom.L_AB),
        "l_BK": np.float64(geom.L_KB),
        "l_KN": np.float64(geom.l_KN),
        "q_KN": np.float64(geom.q_KN),
        "l_BCI": np.float64(geom.L_BC + geom.L_CI),
        "l_LK": np.float64(geom.l_LK),
        "q_LK": np.float64(geom.q_LK),
        "l_BD": np.float64(derived.l_BD),
        "l_DEJ": np.float64(geom.L_ED + geom.L_EJ),
        "l_ML": np.float64(anthropometry.l_ML),
        "l_BHG": np.float64(derived.l_BH + derived.l_HG),
        "l_GF": np.float64(geom.L_GF),
        "l_FD": np.float64(derived.l_FD),
        "db_as_printed": np.float64(geom.db_angle is DbAngle.AS_PRINTED_QK),
    }


def stack_loop_parameters(geoms: Iterable[Geometry], anthropometry: Anthropometry) -> LoopParameters:
    """Loop constants of several geometries, one array entry per geometry."""
    rows = [loop_parameters(geom, anthropometry) for geom in geoms]
    if not rows:
        raise ValueError("Cannot stack loop parameters of an empty geometry list")
    return {key: np.array([row[key] for row in rows]) for key in rows[0]}


def _split(x: np.ndarray, q_fin: np.ndarray):
    x = np.asarray(x, dtype=float)
    q_fin = np.asarray(q_fin, dtype=float)
    return np.moveaxis(x, -1, 0), np.moveaxis(q_fin, -1, 0)


def _loops(x: np.ndarray, q_fin: np.ndarray, p: LoopParameters):
    (l_x, c1, c2, qB, qD, qG, qK, qN), (qo1, qo2) = _split(x, q_fin)
    eB, eD, eG, eK, eN = (np.exp(1j * q) for q in (qB, qD, qG, qK, qN))
    e1, e2 = np.exp(1j * qo1), np.exp(1j * qo2)
    e_LK = p["l_LK"] * np.exp(1j * p["q_LK"])
    e_DB = np.where(p["db_as_printed"] > 0, eK, eB)

    loop1 = (l_x + p["l_act"]) * eN + p["l_AB"] * eB + p["l_BK"] * eK + p["l_KN"] * np.exp(1j * p["q_KN"])
    loop2 = p["l_BK"] * eK + p["l_BCI"] * eB + c1 * e1 + e_LK
    loop3 = p["l_BK"] * eK + p["l_BD"] * eB + p["l_DEJ"] * eD + c2 * e2 + p["l_ML"] * e1 + e_LK
    loop4 = p["l_BHG"] * eK + p["l_GF"] * eG + p["l_FD"] * eD + p["l_BD"] * e_DB
    return loop1, loop2, loop3, loop4


def _interleave(loops: np.ndarray) -> np.ndarray:
    # (..., 4, m) complex -> (..., 8, m) real with x rows before y rows per loop
    shape = loops.shape[:-2] + (2 * loops.shape[-2], loops.shape[-1])
    out = np.empty(shape, dtype=float)
    out[..., 0::2, :] = loops.real
    out[..., 1::2, :] = loops.imag
    return out


def residual_kernel(x: np.ndarray, q_fin: np.ndarray, params: LoopParameters) -> np.ndarray:
    """Residuals of stacked states, shape (..., 8)."""
    loops = np.stack(np.broadcast_arrays(*_loops(x, q_fin, params)), axis=-1)
    return _interleave(loops[..., None])[..., 0]


def jacobian_kernel(
    x: np.ndarray,
    q_fin: np.ndarray,
    params: LoopParameters,
) -> Tuple[np.ndarray, np.ndarray]:
    """Analytic derivatives of the residuals.

    Returns:
        A pair (d_state, d_fin) with shapes (..., 8, 8) and (..., 8, 2): the
        derivative with respect to the unknowns and to (q_o1, q_o2).
    """
    (l_x, c1, c2, qB, qD, qG, qK, qN), (qo1, qo2) = _split(x, q_fin)
    p = params
    eB, eD, eG, eK, eN = (np.exp(1j * q) for q in (qB, qD, qG, qK, qN))
    e1, e2 = np.exp(1j * qo1), np.exp(1j * qo2)
    as_printed = p["db_as_printed"] > 0

    shape = np.broadcast_shapes(np.shape(l_x), np.shape(qo1), *(np.shape(v) for v in p.values()))
    d_state = np.zeros(shape + (4, N_UNKNOWNS), dtype=complex)
    d_fin = np.zeros(shape + (4, 2), dtype=complex)

    # columns: l_x c_1 c_2 q_B q_D q_G q_K q_N
    d_state[..., 0, 0] = eN
    d_state[..., 0, 3] = 1j * p["l_AB"] * eB
    d_state[..., 0, 6] = 1j * p["l_BK"] * eK
    d_state[..., 0, 7] = 1j * (l_x + p["l_act"]) * eN

    d_state[..., 1, 1] = e1
    d_state[..., 1, 3] = 1j * p["l_BCI"] * eB
    d_state[..., 1, 6] = 1j * p["l_BK"] * eK

    d_state[..., 2, 2] = e2
    d_state[..., 2, 3] = 1j * p["l_BD"] * eB
    d_state[..., 2, 4] = 1j * p["l_DEJ"] * eD
    d_state[..., 2, 6] = 1j * p["l_BK"] * eK

    d_state[..., 3, 3] = np.where(as_printed, 0.0, 1j * p["l_BD"] * eB)
    d_state[..., 3, 4] = 1j * p["l_FD"] * eD
    d_state[..., 3, 5] = 1j * p["l_GF"] * eG
    d_state[..., 3, 6] = 1j * (p["l_BHG"] + np.where(as_printed, p["l_BD"], 0.0)) * eK

    d_fin[..., 1, 0] = 1j * c1 * e1
    d_fin[..., 2, 0] = 1j * p["l_ML"] * e1
    d_fin[..., 2, 1] = 1j * c2 * e2

    return _interleave(d_state), _interleave(d_fin)


def loop_residuals(state: MechanismState, pose: FingerPose, geom: Geometry) -> np.ndarray:
    """The eight loop-closure residuals (mm) of a configuration."""
    params = loop_parameters(geom, pose.anthropometry)
    return residual_kernel(state.as_array(), pose.q_fin, params)


def loop_jacobian(
    state: MechanismState,
    pose: FingerPose,
    geom: Geometry,
    params: Optional[LoopParameters] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Analytic 8x8 and 8x2 derivatives of `loop_residuals`."""
    if params is None:
        params = loop_parameters(geom, pose.anthropometry)
    return jacobian_kernel(state.as_array(), pose.q_fin, params)
