from __future__ import annotations

import attr
import numpy as np
import pytest

from exosynth.mechanism.geometry import Anthropometry, FingerPose, Geometry, MechanismState
from exosynth.mechanism.loops import loop_jacobian, loop_residuals

SCALED_LENGTHS = (
    "L_AB", "L_BC", "L_CD", "L_CI", "L_ED", "L_EF", "L_EJ", "L_KB", "L_KH", "L_GH", "L_GF",
    "l_act", "l_KN", "l_LK",
)


def test_seed_closes_at_extension(geometry: Geometry, medium: Anthropometry) -> None:
    pose = geometry.finger_pose(0.0, 0.0, medium)
    assert np.max(np.abs(loop_residuals(geometry.seed, pose, geometry))) < 1e-6


def test_solution_has_zero_residual(solved_states, geometry: Geometry) -> None:
    for pose, state in solved_states.values():
        assert np.max(np.abs(loop_residuals(state, pose, geometry))) < 1e-9


def test_perturbation_is_first_order(solved_states, geometry: Geometry) -> None:
    pose, state = solved_states[(40.0, 45.0)]
    d_state, _ = loop_jacobian(state, pose, geometry)
    for eps in (1e-3, 5e-4):
        moved = attr.evolve(state, q_B=state.q_B + eps)
        r = loop_residuals(moved, pose, geometry)
        assert np.linalg.norm(r) > 0
        np.testing.assert_allclose(r, eps * d_state[:, 3], atol=50 * eps**2)


def test_analytic_jacobian_matches_differences(solved_states, geometry: Geometry) -> None:
    pose, state = solved_states[(20.0, 30.0)]
    d_state, d_fin = loop_jacobian(state, pose, geometry)
    assert d_state.shape == (8, 8)
    assert d_fin.shape == (8, 2)
    h = 1e-6
    x = state.as_array()
    for j in range(8):
        up, down = x.copy(), x.copy()
        up[j] += h
        down[j] -= h
        fd = (
            loop_residuals(MechanismState.from_array(up), pose, geometry)
            - loop_residuals(MechanismState.from_array(down), pose, geometry)
        ) / (2 * h)
        np.testing.assert_allclose(d_state[:, j], fd, atol=1e-5)
    for j, field in enumerate(("q_o1", "q_o2")):
        up = attr.evolve(pose, **{field: getattr(pose, field) + h})
        down = attr.evolve(pose, **{field: getattr(pose, field) - h})
        fd = (loop_residuals(state, up, geometry) - loop_residuals(state, down, geometry)) / (2 * h)
        np.testing.assert_allclose(d_fin[:, j], fd, atol=1e-5)


def test_residuals_homogeneous_in_lengths(solved_states, geometry: Geometry, medium: Anthropometry) -> None:
    pose, state = solved_states[(60.0, 20.0)]
    noisy = attr.evolve(state, q_D=state.q_D + 0.01, c_2=state.c_2 + 0.2)
    k = 2.5
    scaled_geom = geometry.replace(**{name: k * getattr(geometry, name) for name in SCALED_LENGTHS})
    scaled_hand = Anthropometry(l_ML=k * medium.l_ML, l_p2=k * medium.l_p2)
    scaled_pose = FingerPose(q_o1=pose.q_o1, q_o2=pose.q_o2, anthropometry=scaled_hand)
    scaled_state = attr.evolve(noisy, l_x=k * noisy.l_x, c_1=k * noisy.c_1, c_2=k * noisy.c_2)
    base = loop_residuals(noisy, pose, geometry)
    np.testing.assert_allclose(loop_residuals(scaled_state, scaled_pose, scaled_geom), k * base, atol=1e-9)


def test_as_printed_direction_changes_loop_four_only(solved_states, geometry: Geometry) -> None:
    pose, state = solved_states[(40.0, 45.0)]
    corrected = loop_residuals(state, pose, geometry)
    printed = loop_residuals(state, pose, geometry.replace(db_angle="as_printed_qK"))
    np.testing.assert_allclose(printed[:6], corrected[:6])
    assert np.max(np.abs(printed[6:])) > 1e-3


def test_as_printed_jacobian_matches_differences(solved_states, geometry: Geometry) -> None:
    pose, state = solved_states[(40.0, 45.0)]
    printed = geometry.replace(db_angle="as_printed_qK")
    d_state, _ = loop_jacobian(state, pose, printed)
    h = 1e-6
    for j in (3, 6):
        up, down = state.as_array(), state.as_array()
        up[j] += h
        down[j] -= h
        fd = (
            loop_residuals(MechanismState.from_array(up), pose, printed)
            - loop_residuals(MechanismState.from_array(down), pose, printed)
        ) / (2 * h)
        np.testing.assert_allclose(d_state[:, j], fd, atol=1e-5)


@pytest.mark.parametrize("field", ["l_x", "c_1", "c_2"])
def test_linear_unknowns_enter_linearly(solved_states, geometry: Geometry, field: str) -> None:
    pose, state = solved_states[(20.0, 30.0)]
    d_state, _ = loop_jacobian(state, pose, geometry)
    column = ("l_x", "c_1", "c_2").index(field)
    moved = attr.evolve(state, **{field: getattr(state, field) + 1.0})
    np.testing.assert_allclose(loop_residuals(moved, pose, geometry), d_state[:, column], atol=1e-9)
