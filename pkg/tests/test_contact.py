from __future__ import annotations

import math

import numpy as np
import pytest

from exosynth.mechanism.geometry import Anthropometry, anatomical_to_internal
from exosynth.simulation.contact import (
    ContactSet,
    ConvexPolygon,
    Disc,
    closest_point,
    detect_contact,
    line_side,
    object_from_spec,
    phalange_segments,
)


def test_extended_finger_lies_on_x(medium: Anthropometry) -> None:
    segments = phalange_segments(anatomical_to_internal(0.0, 0.0, medium))
    np.testing.assert_allclose(segments["proximal"][1], [50.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(segments["intermediate"][1], [80.0, 0.0], atol=1e-12)


def test_flexion_turns_towards_palm(medium: Anthropometry) -> None:
    segments = phalange_segments(anatomical_to_internal(90.0, 90.0, medium))
    np.testing.assert_allclose(segments["proximal"][1], [0.0, -50.0], atol=1e-9)
    np.testing.assert_allclose(segments["intermediate"][1], [-30.0, -50.0], atol=1e-9)


def test_closest_point_clamps() -> None:
    segment = (np.zeros(2), np.array([10.0, 0.0]))
    point, t = closest_point(np.array([-5.0, 3.0]), segment)
    assert t == 0.0
    np.testing.assert_allclose(point, [0.0, 0.0])
    point, t = closest_point(np.array([4.0, 3.0]), segment)
    assert t == pytest.approx(0.4)
    np.testing.assert_allclose(point, [4.0, 0.0])


@pytest.mark.parametrize("radius, theta_mcp, arc", [(35.0, 20.0, 30.0), (20.0, 35.0, 36.0)])
def test_disc_tangent_to_proximal(medium: Anthropometry, radius: float, theta_mcp: float, arc: float) -> None:
    disc = Disc.tangent_to_proximal(radius, theta_mcp, arc)
    contact = detect_contact(anatomical_to_internal(theta_mcp, 0.0, medium), disc)
    assert contact.gaps["proximal"] == pytest.approx(0.0, abs=1e-6)
    assert contact.gaps["intermediate"] > 0
    assert contact.active == ("proximal",)
    # extended finger clears a disc placed for a flexed MCP
    free = detect_contact(anatomical_to_internal(0.0, 0.0, medium), disc)
    assert min(free.gaps.values()) > 0


def test_distant_and_missing_objects(medium: Anthropometry) -> None:
    pose = anatomical_to_internal(30.0, 30.0, medium)
    far = detect_contact(pose, Disc(center=(0.0, 500.0), radius=5.0))
    assert all(gap > 0 for gap in far.gaps.values())
    assert far.active == ()
    missing = detect_contact(pose, None)
    assert missing.gaps == {"proximal": np.inf, "intermediate": np.inf}
    assert missing.active == ()


def test_disc_on_the_pip_joint_touches_both(medium: Anthropometry) -> None:
    pose = anatomical_to_internal(30.0, 40.0, medium)
    pip = phalange_segments(pose)["proximal"][1]
    contact = detect_contact(pose, Disc(center=(float(pip[0]), float(pip[1])), radius=5.0))
    assert contact.active == ("proximal", "intermediate")
    assert contact.penetration("proximal") == pytest.approx(5.0)
    assert contact.penetration("intermediate") == pytest.approx(5.0)


def test_disc_validation() -> None:
    with pytest.raises(ValueError):
        Disc(center=(0.0, 0.0), radius=0.0)
    with pytest.raises(ValueError):
        Disc(center=(0.0, 0.0, 1.0), radius=3.0)


def test_polygon_signed_distance() -> None:
    segment = (np.zeros(2), np.array([50.0, 0.0]))
    below = ConvexPolygon(vertices=((10.0, -15.0), (20.0, -15.0), (20.0, -5.0), (10.0, -5.0)))
    assert below.signed_distance(segment) == pytest.approx(5.0)
    crossing = ConvexPolygon(vertices=((10.0, -5.0), (20.0, -5.0), (20.0, 5.0), (10.0, 5.0)))
    assert crossing.signed_distance(segment) == pytest.approx(-5.0)
    corner = ConvexPolygon(vertices=((53.0, 4.0), (60.0, 4.0), (60.0, 10.0)))
    assert corner.signed_distance(segment) == pytest.approx(5.0)


def test_polygon_validation() -> None:
    with pytest.raises(ValueError, match="three"):
        ConvexPolygon(vertices=((0.0, 0.0), (1.0, 0.0)))
    with pytest.raises(ValueError, match="counter-clockwise"):
        ConvexPolygon(vertices=((0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)))


def test_contact_set_tolerance() -> None:
    contact = ContactSet(gaps={"proximal": 5e-7, "intermediate": 1e-3})
    assert contact.active == ("proximal",)
    assert contact.penetration("proximal") == 0.0
    assert ContactSet(gaps={"proximal": 5e-7, "intermediate": 1e-3}, tolerance=1e-2).active == (
        "proximal",
        "intermediate",
    )


def test_object_from_spec() -> None:
    assert object_from_spec("disc:10,-20,5") == Disc(center=(10.0, -20.0), radius=5.0)
    polygon = object_from_spec("Polygon: 0,0; 10,0; 10,10")
    assert polygon == ConvexPolygon(vertices=((0.0, 0.0), (10.0, 0.0), (10.0, 10.0)))


@pytest.mark.parametrize(
    "spec, message",
    [
        ("cube:1,2,3", "Unknown object kind"),
        ("disc:1,2", "Malformed"),
        ("disc:1,2,-3", "Malformed"),
        ("polygon:0,0;1,x;2,2", "Malformed"),
    ],
)
def test_object_spec_errors(spec: str, message: str) -> None:
    with pytest.raises(ValueError, match=message):
        object_from_spec(spec)


@pytest.mark.parametrize("q_o1_ref", [math.pi / 2, 0.0, 2.5])
def test_segments_follow_the_extension_reference(medium: Anthropometry, q_o1_ref: float) -> None:
    disc = Disc.tangent_to_proximal(20.0, 35.0, 36.0)
    for theta_mcp, theta_pip in [(0.0, 0.0), (35.0, 0.0), (60.0, 75.0)]:
        usual = anatomical_to_internal(theta_mcp, theta_pip, medium)
        rotated = anatomical_to_internal(theta_mcp, theta_pip, medium, q_o1_ref=q_o1_ref)
        for name, (start, end) in phalange_segments(rotated, q_o1_ref).items():
            np.testing.assert_allclose(start, phalange_segments(usual)[name][0], atol=1e-9)
            np.testing.assert_allclose(end, phalange_segments(usual)[name][1], atol=1e-9)
        expected = detect_contact(usual, disc).gaps
        gaps = detect_contact(rotated, disc, q_o1_ref=q_o1_ref).gaps
        for name in expected:
            assert gaps[name] == pytest.approx(expected[name], abs=1e-9)


def test_line_side() -> None:
    segment = (np.zeros(2), np.array([10.0, 0.0]))
    side, t = line_side(np.array([4.0, 2.0]), segment)
    assert side == 1
    assert t == pytest.approx(0.4)
    side, t = line_side(np.array([15.0, -1.0]), segment)
    assert side == -1
    assert t == pytest.approx(1.5)


def test_interior_points() -> None:
    np.testing.assert_allclose(Disc(center=(3.0, -4.0), radius=1.0).interior_point, [3.0, -4.0])
    square = ConvexPolygon(vertices=((0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)))
    np.testing.assert_allclose(square.interior_point, [1.0, 1.0])
