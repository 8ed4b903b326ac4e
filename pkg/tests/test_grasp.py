from __future__ import annotations

import math
from typing import List, Tuple

import numpy as np
import pytest

from exosynth.kinematics.statics import GraspStability
from exosynth.mechanism.geometry import Anthropometry, Geometry
from exosynth.simulation.contact import ContactSet, Disc, line_side, phalange_segments
from exosynth.simulation.grasp import (
    CONTACT_STIFFNESS,
    EquilibriumStep,
    FingerImpedance,
    GraspTrace,
    closed_step,
    equilibrium_step,
    passed_through,
    simulate_grasp,
    stroke_schedule,
)

LARGE = Disc.tangent_to_proximal(35.0, 20.0, 30.0)
SMALL = Disc.tangent_to_proximal(20.0, 35.0, 36.0)
# wraps both phalanges at low enough PIP flexion for both forces to build up
WRAPPED = Disc.tangent_to_proximal(35.0, 40.0, 30.0)


def _closing(geometry: Geometry, stop: float, step: float = 0.25) -> np.ndarray:
    return stroke_schedule(geometry.seed.l_x, stop, step)


def _pairs(trace: GraspTrace) -> List[Tuple[EquilibriumStep, EquilibriumStep]]:
    return list(zip(trace.steps[:-1], trace.steps[1:]))


@pytest.fixture(scope="module")
def free_trace(geometry: Geometry, medium: Anthropometry) -> GraspTrace:
    return simulate_grasp(geometry, medium, schedule=_closing(geometry, 24.0, 1.0), substep=1.0)


@pytest.fixture(scope="module")
def large_trace(geometry: Geometry, medium: Anthropometry) -> GraspTrace:
    return simulate_grasp(geometry, medium, obj=LARGE, schedule=_closing(geometry, 5.0))


@pytest.fixture(scope="module")
def small_trace(geometry: Geometry, medium: Anthropometry) -> GraspTrace:
    return simulate_grasp(geometry, medium, obj=SMALL, schedule=_closing(geometry, 9.0))


@pytest.fixture(scope="module")
def wrapped_trace(geometry: Geometry, medium: Anthropometry) -> GraspTrace:
    schedule = np.concatenate([_closing(geometry, 7.5, 0.5), stroke_schedule(7.5, 7.56, 0.005)[1:]])
    return simulate_grasp(geometry, medium, obj=WRAPPED, schedule=schedule)


def test_stroke_schedule() -> None:
    np.testing.assert_allclose(stroke_schedule(0.0, 3.0, 1.0), [0.0, 1.0, 2.0, 3.0])
    np.testing.assert_allclose(stroke_schedule(0.0, 2.5, 1.0), [0.0, 1.0, 2.0, 2.5])
    np.testing.assert_allclose(stroke_schedule(3.0, 0.0, 1.5), [3.0, 1.5, 0.0])
    np.testing.assert_allclose(stroke_schedule(4.0, 4.0, 1.0), [4.0])
    with pytest.raises(ValueError):
        stroke_schedule(0.0, 1.0, 0.0)


def test_impedance() -> None:
    impedance = FingerImpedance(k_mcp=2.0, k_pip=4.0)
    assert impedance.energy(0.0, 0.0) == 0.0
    assert impedance.energy(1.0, 0.5) == pytest.approx(1.0 + 0.5)
    # past an end stop the stop spring takes over
    assert impedance.energy(-0.01, 0.0) == pytest.approx(0.5 * 2.0 * 1e-4 + 0.5 * impedance.k_stop * 1e-4)
    over = math.radians(101.0)
    assert impedance.energy(0.0, over) > 0.5 * impedance.k_stop * math.radians(1.0) ** 2
    with pytest.raises(ValueError):
        FingerImpedance(k_mcp=0.0)
    with pytest.raises(ValueError):
        FingerImpedance(mcp_range=(1.0, 0.0))
    with pytest.raises(ValueError):
        FingerImpedance(k_stop=0.0)


def test_empty_schedule(geometry: Geometry) -> None:
    trace = simulate_grasp(geometry, schedule=[])
    assert len(trace) == 0
    assert trace.stability is None
    assert trace.to_frame().empty


def test_schedule_must_start_at_extension(geometry: Geometry) -> None:
    with pytest.raises(ValueError, match="extension stroke"):
        simulate_grasp(geometry, schedule=[5.0, 6.0])


def test_bad_limits(geometry: Geometry) -> None:
    with pytest.raises(ValueError, match="force limit"):
        simulate_grasp(geometry, schedule=[0.0], max_force=0.0)
    with pytest.raises(ValueError, match="substep"):
        simulate_grasp(geometry, schedule=[0.0], substep=-1.0)


def test_object_penetrating_the_extended_finger(geometry: Geometry) -> None:
    with pytest.raises(ValueError, match="penetrates"):
        simulate_grasp(geometry, obj=Disc(center=(25.0, 0.0), radius=5.0), schedule=[geometry.seed.l_x])


def test_free_motion_has_no_forces(free_trace: GraspTrace, geometry: Geometry) -> None:
    assert len(free_trace) == len(_closing(geometry, 24.0, 1.0))
    frame = free_trace.to_frame()
    assert (frame[["F_proximal", "F_intermediate"]] == 0.0).all().all()
    assert free_trace.first_contact_stroke("proximal") is None
    assert not frame["stalled"].any()
    # the MCP leads while the finger closes freely
    at_five = frame.loc[np.isclose(frame["l_x"], 5.0)].iloc[0]
    assert at_five["theta_mcp"] > 3 * at_five["theta_pip"] > 0


def test_free_motion_rests_on_the_mcp_stop(free_trace: GraspTrace) -> None:
    frame = free_trace.to_frame()
    assert frame["theta_mcp"].max() == pytest.approx(85.0, abs=0.01)
    # once the MCP is on its stop the stroke goes into the PIP
    pinned = frame[frame["theta_mcp"] > 84.99]
    assert len(pinned) >= 3
    assert pinned["theta_pip"].is_monotonic_increasing


@pytest.mark.parametrize("name", ["free_trace", "large_trace", "small_trace", "wrapped_trace"])
def test_joints_stay_within_range(request, name: str) -> None:
    frame = request.getfixturevalue(name).to_frame()
    assert frame["theta_mcp"].min() >= -0.01
    assert frame["theta_mcp"].max() <= 85.01
    assert frame["theta_pip"].min() >= -0.01
    assert frame["theta_pip"].max() <= 100.01


def test_closed_poses_follow_the_schedule(large_trace: GraspTrace) -> None:
    for step, target in zip(large_trace.steps, large_trace.targets):
        assert step.state.l_x == pytest.approx(step.l_x)
        if not step.stalled:
            assert step.l_x == pytest.approx(target)
        else:
            assert step.l_x < target


def test_contact_forces_follow_the_penalty(large_trace: GraspTrace, small_trace: GraspTrace) -> None:
    for trace in (large_trace, small_trace):
        frame = trace.to_frame()
        assert (frame[["F_proximal", "F_intermediate"]] >= 0.0).all().all()
        for phalange in ("proximal", "intermediate"):
            penetration = np.maximum(0.0, -frame[f"gap_{phalange}"])
            np.testing.assert_allclose(frame[f"F_{phalange}"], CONTACT_STIFFNESS * penetration, atol=1e-9)
        touching = frame["gap_proximal"] <= 1e-6
        assert (frame.loc[~touching, "F_proximal"] == 0.0).all()


def test_proximal_contact_comes_first(large_trace: GraspTrace, small_trace: GraspTrace) -> None:
    for trace in (large_trace, small_trace):
        proximal = trace.first_contact_stroke("proximal")
        intermediate = trace.first_contact_stroke("intermediate")
        assert proximal is not None
        assert intermediate is not None
        assert proximal < intermediate


def test_large_object_is_reached_earlier(large_trace: GraspTrace, small_trace: GraspTrace) -> None:
    large = large_trace.first_contact_stroke("proximal")
    small = small_trace.first_contact_stroke("proximal")
    assert large == pytest.approx(1.5, abs=0.26)
    assert small == pytest.approx(4.0, abs=0.26)
    assert large < small


@pytest.mark.parametrize("name", ["large_trace", "small_trace"])
def test_mcp_freezes_on_proximal_contact(request, name: str) -> None:
    trace = request.getfixturevalue(name)
    held = 0
    for before, after in _pairs(trace):
        single = before.contacts.active == after.contacts.active == ("proximal",)
        if not single or before.forces["proximal"] <= 0.5 or after.stalled:
            continue
        d_mcp = abs(math.degrees(after.theta_mcp - before.theta_mcp))
        d_pip = abs(math.degrees(after.theta_pip - before.theta_pip))
        assert d_mcp <= 0.1 * d_pip
        assert d_mcp < 0.5
        held += 1
    assert held >= 3


def test_both_forces_rise_while_wrapped(wrapped_trace: GraspTrace) -> None:
    rising = 0
    for before, after in _pairs(wrapped_trace):
        both = len(before.contacts.active) == len(after.contacts.active) == 2
        if not both or after.stalled:
            continue
        assert after.forces["proximal"] > before.forces["proximal"]
        assert after.forces["intermediate"] > before.forces["intermediate"]
        rising += 1
    assert rising >= 2
    assert wrapped_trace.steps[-1].stalled


def test_actuator_stalls_on_a_rigid_object(large_trace: GraspTrace) -> None:
    frame = large_trace.to_frame()
    stalled = frame[frame["stalled"]]
    assert not stalled.empty
    # the stall holds one stroke once reached
    assert stalled["l_x"].nunique() == 1
    assert stalled["l_x"].iloc[0] == pytest.approx(3.49, abs=0.02)
    np.testing.assert_allclose(stalled["f_ac"], 40.0, atol=1e-3)
    assert (frame["f_ac"] <= 40.0 + 1e-3).all()
    # the grasp closes around the disc before the stall
    assert set(large_trace.steps[-1].contacts.active) == {"proximal", "intermediate"}


def test_penetration_is_bounded_by_the_force_limit(geometry: Geometry, medium: Anthropometry, large_trace: GraspTrace) -> None:
    soft = simulate_grasp(geometry, medium, obj=LARGE, schedule=_closing(geometry, 5.0), max_force=10.0)
    strong = large_trace.to_frame()
    weak = soft.to_frame()
    assert weak["stalled"].any()
    assert weak.loc[weak["stalled"], "l_x"].iloc[0] < strong.loc[strong["stalled"], "l_x"].iloc[0]
    assert (weak["f_ac"] <= 10.0 + 1e-3).all()
    for frame, bound in ((strong, 20.0), (weak, 10.0)):
        deepest = max(-frame["gap_proximal"].min(), -frame["gap_intermediate"].min())
        assert deepest <= bound / CONTACT_STIFFNESS


@pytest.mark.parametrize("index", [4, 7, 10, 13])
def test_step_never_climbs_above_its_warm_start(
    large_trace: GraspTrace, geometry: Geometry, medium: Anthropometry, index: int
) -> None:
    previous = large_trace.steps[index]
    impedance = FingerImpedance()
    l_x = previous.l_x + 0.05
    step = equilibrium_step(l_x, previous, LARGE, impedance, geometry, medium)
    warm = closed_step(l_x, previous.theta_pip, previous, LARGE, impedance, geometry, medium)
    assert warm is not None
    assert step.energy <= warm.energy + 1e-9
    # and it sits at a minimum of its stroke curve
    for offset in (-0.2, 0.2):
        nearby = closed_step(l_x, step.theta_pip + math.radians(offset), step, LARGE, impedance, geometry, medium)
        assert nearby is not None
        assert nearby.energy >= step.energy - 1e-9


@pytest.mark.parametrize("name, obj", [("large_trace", LARGE), ("small_trace", SMALL), ("wrapped_trace", WRAPPED)])
def test_no_phalange_passes_through_the_object(request, name: str, obj: Disc, geometry: Geometry) -> None:
    trace = request.getfixturevalue(name)
    for before, after in _pairs(trace):
        assert passed_through(before, after, obj, geometry.q_o1_ref) is None


def test_passed_through_detects_a_crossing(geometry: Geometry, medium: Anthropometry) -> None:
    pebble = Disc.tangent_to_proximal(3.0, 30.0, 30.0)

    def posed(theta_mcp: float) -> EquilibriumStep:
        return EquilibriumStep(
            l_x=0.0,
            state=geometry.seed,
            pose=geometry.finger_pose(theta_mcp, 0.0, medium),
            theta_mcp=math.radians(theta_mcp),
            theta_pip=0.0,
            contacts=ContactSet(gaps={"proximal": np.inf, "intermediate": np.inf}),
            forces={"proximal": 0.0, "intermediate": 0.0},
            energy=0.0,
        )

    assert passed_through(posed(25.0), posed(29.0), pebble, geometry.q_o1_ref) is None
    assert passed_through(posed(25.0), posed(40.0), pebble, geometry.q_o1_ref) == "proximal"
    assert passed_through(posed(25.0), posed(40.0), None, geometry.q_o1_ref) is None


def test_coarse_increments_are_cut(geometry: Geometry, medium: Anthropometry) -> None:
    pebble = Disc.tangent_to_proximal(2.0, 10.0, 30.0)
    schedule = [geometry.seed.l_x, 2.0]
    coarse = simulate_grasp(geometry, medium, obj=pebble, schedule=schedule, substep=2.0).steps[-1]
    fine = simulate_grasp(geometry, medium, obj=pebble, schedule=schedule).steps[-1]
    assert "proximal" in coarse.contacts.active
    assert math.degrees(coarse.theta_mcp) == pytest.approx(math.degrees(fine.theta_mcp), abs=0.5)
    extended = phalange_segments(geometry.finger_pose(0.0, 0.0, medium), geometry.q_o1_ref)["proximal"]
    closed = phalange_segments(coarse.pose, geometry.q_o1_ref)["proximal"]
    assert line_side(pebble.interior_point, closed)[0] == line_side(pebble.interior_point, extended)[0]


def test_release_returns_forces_to_zero(geometry: Geometry, medium: Anthropometry) -> None:
    closing = _closing(geometry, 5.0, 0.5)
    schedule = np.concatenate([closing, closing[::-1][1:]])
    trace = simulate_grasp(geometry, medium, obj=LARGE, schedule=schedule)
    frame = trace.to_frame()
    assert frame["stalled"].any()
    assert not frame["stalled"].iloc[-1]
    assert frame["F_proximal"].iloc[-1] == 0.0
    assert frame["F_intermediate"].iloc[-1] == 0.0
    assert frame["theta_mcp"].iloc[-1] == pytest.approx(0.0, abs=0.01)


def test_final_stability(large_trace: GraspTrace) -> None:
    assert large_trace.stability in (GraspStability.STABLE, GraspStability.UNSTABLE)


def test_single_equilibrium_step(large_trace: GraspTrace, geometry: Geometry, medium: Anthropometry) -> None:
    previous = large_trace.steps[5]
    step = equilibrium_step(previous.l_x + 0.05, previous, LARGE, FingerImpedance(), geometry, medium)
    assert step.l_x == pytest.approx(previous.l_x + 0.05)
    assert step.actuator_force > 0
    with pytest.raises(ValueError):
        equilibrium_step(previous.l_x, previous, LARGE, FingerImpedance(), geometry, medium, contact_stiffness=0.0)


def test_unknown_phalange(large_trace: GraspTrace) -> None:
    with pytest.raises(ValueError, match="phalange"):
        large_trace.first_contact_stroke("distal")


def test_trace_frame_columns(large_trace: GraspTrace) -> None:
    frame = large_trace.to_frame()
    assert list(frame.columns) == [
        "step", "target", "l_x", "theta_mcp", "theta_pip", "F_proximal", "F_intermediate",
        "gap_proximal", "gap_intermediate", "energy", "f_ac", "stalled",
    ]
    assert frame["step"].tolist() == list(range(len(large_trace)))
    np.testing.assert_allclose(frame["target"], large_trace.targets)
