from __future__ import annotations

import math

import attr
import numpy as np
import pytest

from exosynth.exceptions import BranchEscape, NoConvergence, SolverError
from exosynth.kinematics import pose_solver
from exosynth.kinematics.pose_solver import (
    SolverSettings,
    SolveStatus,
    check_limits,
    grid_walk,
    newton_solve,
    solve_batch,
    solve_pose,
    sweep_workspace,
    walk_solve,
)
from exosynth.mechanism.geometry import Anthropometry, Geometry, MechanismState
from exosynth.mechanism.loops import loop_parameters, loop_residuals, stack_loop_parameters

ACCEPTANCE_MCP = np.arange(0.0, 81.0, 10.0)
ACCEPTANCE_PIP = np.arange(0.0, 91.0, 10.0)


def test_acceptance_grid_closes(geometry: Geometry, medium: Anthropometry) -> None:
    for theta_mcp in ACCEPTANCE_MCP:
        for theta_pip in ACCEPTANCE_PIP:
            pose = geometry.finger_pose(theta_mcp, theta_pip, medium)
            state = solve_pose(pose, geometry)
            assert np.max(np.abs(loop_residuals(state, pose, geometry))) < 1e-9


def test_extension_reproduces_seed(solved_states, geometry: Geometry) -> None:
    _, state = solved_states[(0.0, 0.0)]
    assert state.l_x == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(state.as_array(), geometry.seed.as_array(), atol=1e-6)


def test_full_flexion(solved_states) -> None:
    _, state = solved_states[(80.0, 90.0)]
    assert 0.0 <= state.l_x <= 50.0
    assert state.l_x == pytest.approx(26.366, abs=1e-2)
    assert state.c_1 == pytest.approx(20.394, abs=1e-2)
    assert state.c_2 == pytest.approx(34.145, abs=1e-2)


@pytest.mark.parametrize("angles, l_x", [((20.0, 0.0), 1.334), ((20.0, 20.0), 1.798), ((0.0, 90.0), 4.095)])
def test_known_strokes(geometry: Geometry, medium: Anthropometry, angles, l_x: float) -> None:
    state = solve_pose(geometry.finger_pose(*angles, medium), geometry)
    assert state.l_x == pytest.approx(l_x, abs=1e-2)


def test_solution_as_guess_is_fixed_point(solved_states, geometry: Geometry) -> None:
    pose, state = solved_states[(40.0, 45.0)]
    result = solve_batch(pose.q_fin[None], loop_parameters(geometry, pose.anthropometry), state.as_array()[None])
    assert result.status[0] == SolveStatus.CONVERGED
    assert result.iterations[0] <= 1
    again = solve_pose(pose, geometry, guess=state)
    np.testing.assert_allclose(again.as_array(), state.as_array(), atol=1e-9)


def test_nearby_guess_converges(solved_states, geometry: Geometry) -> None:
    pose, state = solved_states[(20.0, 30.0)]
    guess = attr.evolve(state, c_1=state.c_1 + 0.5, q_K=state.q_K + 0.02)
    solved = solve_pose(pose, geometry, guess=guess)
    np.testing.assert_allclose(solved.as_array(), state.as_array(), atol=1e-8)


def test_iteration_budget(solved_states, geometry: Geometry) -> None:
    pose, state = solved_states[(40.0, 45.0)]
    guess = attr.evolve(state, q_D=state.q_D + 0.3, c_2=state.c_2 - 5.0)
    with pytest.raises(NoConvergence):
        solve_pose(pose, geometry, guess=guess, settings=SolverSettings(max_iter=1))


def test_branch_escape(solved_states, geometry: Geometry) -> None:
    pose, state = solved_states[(40.0, 45.0)]
    with pytest.raises(BranchEscape):
        solve_pose(pose, geometry, guess=state, settings=SolverSettings(branch_jump=-1.0))


def test_seedless_geometry_needs_guess(geometry: Geometry, medium: Anthropometry) -> None:
    with pytest.raises(ValueError, match="seed"):
        solve_pose(geometry.finger_pose(10.0, 10.0, medium), geometry.replace(seed=None))


def test_settings_validation() -> None:
    with pytest.raises(ValueError):
        SolverSettings(tol_residual=0.0)
    with pytest.raises(ValueError):
        SolverSettings(max_iter=0)
    with pytest.raises(ValueError):
        SolverSettings(damping=1.5)


def test_newton_rows_are_independent() -> None:
    def fun(x: np.ndarray) -> np.ndarray:
        return np.stack([x[..., 0] ** 2 - 4.0, x[..., 1] - x[..., 0]], axis=-1)

    result = newton_solve(fun, np.array([[1.0, 0.0], [3.0, 3.0]]), angle_columns=slice(0, 1))
    assert result.converged.all()
    np.testing.assert_allclose(result.x, [[2.0, 2.0], [2.0, 2.0]], atol=1e-9)


def test_newton_reports_singular_rows() -> None:
    def fun(x: np.ndarray) -> np.ndarray:
        return np.stack([x[..., 0] + x[..., 1] - 1.0, 2 * x[..., 0] + 2 * x[..., 1] - 2.5], axis=-1)

    result = newton_solve(fun, np.zeros((1, 2)), angle_columns=slice(0, 1))
    assert result.status[0] == SolveStatus.SINGULAR


def test_flexion_path_is_monotone(geometry: Geometry, medium: Anthropometry) -> None:
    path = [geometry.finger_pose(t, t * 90.0 / 80.0, medium) for t in np.linspace(0.0, 80.0, 41)]
    states = sweep_workspace(path, geometry)
    l_x = np.array([s.l_x for s in states])
    assert np.all(np.diff(l_x) >= -1e-9)


def test_path_of_one_pose_matches_solve(solved_states, geometry: Geometry) -> None:
    pose, state = solved_states[(0.0, 0.0)]
    (swept,) = sweep_workspace([pose], geometry)
    np.testing.assert_allclose(swept.as_array(), state.as_array(), atol=1e-9)


def test_reversed_path_reverses_states(geometry: Geometry, medium: Anthropometry) -> None:
    path = [geometry.finger_pose(10.0, p, medium) for p in np.arange(0.0, 31.0, 5.0)]
    forward = sweep_workspace(path, geometry)
    backward = sweep_workspace(path[::-1], geometry)
    for a, b in zip(forward, backward[::-1]):
        np.testing.assert_allclose(a.as_array(), b.as_array(), atol=1e-8)


def test_sweep_validates_path(geometry: Geometry, medium: Anthropometry) -> None:
    with pytest.raises(ValueError, match="empty"):
        sweep_workspace([], geometry)
    with pytest.raises(ValueError, match="differ"):
        sweep_workspace([geometry.finger_pose(0.0, 0.0, medium), geometry.finger_pose(30.0, 0.0, medium)], geometry)


def test_sweep_failure_carries_path_index(geometry: Geometry, medium: Anthropometry) -> None:
    path = [geometry.finger_pose(0.0, 0.0, medium), geometry.finger_pose(2.0, 0.0, medium)]
    with pytest.raises(SolverError) as e:
        sweep_workspace(path, geometry, settings=SolverSettings(branch_jump=-1.0))
    assert e.value.path_index == 0
    assert "path index 0" in str(e.value)


def test_grid_walk_visits_every_pose() -> None:
    walk = grid_walk([0.0, 10.0, 20.0], [0.0, 15.0, 30.0], max_step=5.0)
    visited = {step.grid_index: (step.theta_mcp, step.theta_pip) for step in walk if step.grid_index is not None}
    assert len(visited) == 9
    assert visited[(2, 1)] == (20.0, 15.0)
    assert walk[0].warm == -1
    for step in walk[1:]:
        prior = walk[step.warm]
        assert abs(step.theta_mcp - prior.theta_mcp) <= 5.0 + 1e-9
        assert abs(step.theta_pip - prior.theta_pip) <= 5.0 + 1e-9


def test_grid_walk_validation() -> None:
    with pytest.raises(ValueError):
        grid_walk([], [0.0])
    with pytest.raises(ValueError):
        grid_walk([0.0, 0.0], [0.0])
    with pytest.raises(ValueError):
        grid_walk([-10.0], [0.0])


def test_walk_solve_matches_single_solves(geometry: Geometry, medium: Anthropometry) -> None:
    walk = grid_walk([0.0, 40.0], [0.0, 45.0])
    params = loop_parameters(geometry, medium)
    states, status = walk_solve(walk, params, geometry.seed.as_array()[None], geometry.q_o1_ref)
    assert (status == SolveStatus.CONVERGED).all()
    for s, step in enumerate(walk):
        if step.grid_index == (1, 1):
            state = solve_pose(geometry.finger_pose(40.0, 45.0, medium), geometry)
            np.testing.assert_allclose(states[s, 0], state.as_array(), atol=1e-8)


def _counting_solver(monkeypatch) -> list:
    sizes = []
    original = pose_solver.solve_batch

    def counting(q_fin, params, x0, settings=None):
        sizes.append(len(x0))
        return original(q_fin, params, x0, settings)

    monkeypatch.setattr(pose_solver, "solve_batch", counting)
    return sizes


def test_walk_solve_drops_failed_rows(geometry: Geometry, medium: Anthropometry, monkeypatch) -> None:
    walk = grid_walk([0.0, 20.0], [0.0, 30.0])
    alone, _ = walk_solve(walk, loop_parameters(geometry, medium), geometry.seed.as_array()[None], geometry.q_o1_ref)
    # no Loop 4 closure exists for the second geometry
    params = stack_loop_parameters([geometry, geometry.replace(L_GF=500.0)], medium)
    seeds = np.stack([geometry.seed.as_array()] * 2)
    sizes = _counting_solver(monkeypatch)
    states, status = walk_solve(walk, params, seeds, geometry.q_o1_ref)
    assert (status[:, 0] == SolveStatus.CONVERGED).all()
    assert (status[:, 1] != SolveStatus.CONVERGED).all()
    assert sizes[0] == 2
    assert sizes[1:] == [1] * (len(walk) - 1)
    np.testing.assert_allclose(states[:, 0], alone[:, 0], atol=1e-10)
    np.testing.assert_array_equal(states[-1, 1], states[0, 1])


def test_walk_solve_stops_when_every_row_failed(geometry: Geometry, medium: Anthropometry, monkeypatch) -> None:
    walk = grid_walk([0.0, 20.0], [0.0, 30.0])
    broken = geometry.replace(L_GF=500.0)
    sizes = _counting_solver(monkeypatch)
    _, status = walk_solve(walk, loop_parameters(broken, medium), broken.seed.as_array()[None], broken.q_o1_ref)
    assert sizes == [1]
    assert (status[:, 0] == status[0, 0]).all()
    assert status[0, 0] != SolveStatus.CONVERGED


def test_check_limits_closed_bounds(medium: Anthropometry) -> None:
    state = MechanismState(l_x=10.0, c_1=50.0, c_2=40.1, q_B=0.0, q_D=0.0, q_G=0.0, q_K=0.0, q_N=0.0)
    report = check_limits(state, medium)
    assert report.c1_ok
    assert report.c1_margin == 0.0
    assert not report.c2_ok
    assert report.c2_margin == pytest.approx(-0.1)
    assert report.lx_ok
    assert not report.all_ok

    negative = attr.evolve(state, l_x=-0.5, c_2=20.0)
    report = check_limits(negative, medium)
    assert not report.lx_ok
    assert report.lx_margin == pytest.approx(-0.5)
    assert check_limits(negative, medium, tolerance=1.0).all_ok


def test_limits_hold_over_workspace(geometry: Geometry, medium: Anthropometry) -> None:
    for theta_mcp in ACCEPTANCE_MCP[::2]:
        for theta_pip in ACCEPTANCE_PIP[::3]:
            state = solve_pose(geometry.finger_pose(theta_mcp, theta_pip, medium), geometry)
            assert check_limits(state, medium, tolerance=1e-6).all_ok, (theta_mcp, theta_pip)
            assert not math.isnan(state.c_2)
