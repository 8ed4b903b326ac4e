from __future__ import annotations

from typing import Dict, Tuple

import numpy as np
import pytest

from exosynth.kinematics.pose_solver import solve_pose
from exosynth.mechanism import Anthropometry, AnthropometryPreset, FingerPose, Geometry, MechanismState, reference_geometry

Solved = Dict[Tuple[float, float], Tuple[FingerPose, MechanismState]]


@pytest.fixture(scope="session")
def geometry() -> Geometry:
    return reference_geometry()


@pytest.fixture(scope="session")
def medium() -> Anthropometry:
    return AnthropometryPreset.MEDIUM.value


@pytest.fixture(scope="session")
def solved_states(geometry: Geometry, medium: Anthropometry) -> Solved:
    """Reference-geometry solutions at a handful of interior and boundary poses."""
    solved = {}
    for theta_mcp, theta_pip in [(0.0, 0.0), (20.0, 30.0), (40.0, 45.0), (60.0, 20.0), (80.0, 90.0)]:
        pose = geometry.finger_pose(theta_mcp, theta_pip, medium)
        solved[(theta_mcp, theta_pip)] = (pose, solve_pose(pose, geometry))
    return solved


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
