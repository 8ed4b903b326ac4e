"""Planar contact geometry between the phalanges and a rigid convex object.

The phalanges are zero-thickness segments in the finger plane with the MCP
joint at the origin and +x along the extended finger. Orientations are taken
relative to the geometry's extension reference q_o1_ref: the proximal
phalanx runs from the origin along exp(i (q_o1 - q_o1_ref)) for l_ML, the
intermediate one from the PIP joint along exp(i (q_o2 - q_o1_ref)) for l_p2,
so flexion turns the finger towards -y whatever the base frame.
"""

import logging
import math
from abc import ABC, abstractmethod
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from attr import dataclass

from exosynth.mechanism.geometry import Q_O1_REF, FingerPose

logger = logging.getLogger(__name__)

CONTACT_TOLERANCE = 1e-6
PHALANGES = ("proximal", "intermediate")

Segment = Tuple[np.ndarray, np.ndarray]


def phalange_segments(pose: FingerPose, q_o1_ref: float = Q_O1_REF) -> Dict[str, Segment]:
    """End points (mm) of the proximal and intermediate segments."""
    anthro = pose.anthropometry
    mcp = np.zeros(2)
    a1 = pose.q_o1 - q_o1_ref
    a2 = pose.q_o2 - q_o1_ref
    pip = anthro.l_ML * np.array([math.cos(a1), math.sin(a1)])
    tip = pip + anthro.l_p2 * np.array([math.cos(a2), math.sin(a2)])
    return {"proximal": (mcp, pip), "intermediate": (pip, tip)}


def closest_point(point: np.ndarray, segment: Segment) -> Tuple[np.ndarray, float]:
    """Closest point of `segment` to `point` and its arc parameter in [0, 1]."""
    start, end = segment
    axis = end - start
    length_sq = float(axis @ axis)
    t = 0.0 if length_sq == 0 else float(np.clip((point - start) @ axis / length_sq, 0.0, 1.0))
    return start + t * axis, t


def line_side(point: np.ndarray, segment: Segment) -> Tuple[int, float]:
    """Side of the segment's line holding `point` (+1 left, -1 right) and its unclamped arc parameter."""
    start, end = segment
    axis = end - start
    offset = point - start
    cross = axis[0] * offset[1] - axis[1] * offset[0]
    length_sq = float(axis @ axis)
    return (1 if cross > 0 else -1), (0.0 if length_sq == 0 else float(offset @ axis / length_sq))


class ObjectShape(ABC):
    """Rigid convex object in the finger plane."""

    @abstractmethod
    def signed_distance(self, segment: Segment) -> float:
        """Gap (mm) between the object and a segment, negative by the penetration depth."""
        pass

    @property
    @abstractmethod
    def interior_point(self) -> np.ndarray:
        """A point strictly inside the object; a phalange passing over it went through the object."""
        pass


@dataclass(frozen=True)
class Disc(ObjectShape):
    center: Tuple[float, float]
    radius: float

    def __attrs_post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"Disc radius must be positive, got {self.radius}")
        if len(self.center) != 2:
            raise ValueError(f"Disc center must have two coordinates, got {self.center}")

    @classmethod
    def tangent_to_proximal(cls, radius: float, theta_mcp: float, arc: float) -> "Disc":
        """Disc touching the proximal phalanx from the palm side at `arc` mm when MCP is flexed `theta_mcp` deg."""
        angle = -np.radians(theta_mcp)
        direction = np.array([np.cos(angle), np.sin(angle)])
        normal = np.array([np.sin(angle), -np.cos(angle)])
        center = arc * direction + radius * normal
        return cls(center=(float(center[0]), float(center[1])), radius=radius)

    @property
    def interior_point(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def signed_distance(self, segment: Segment) -> float:
        center = np.asarray(self.center, dtype=float)
        nearest, _ = closest_point(center, segment)
        return float(np.linalg.norm(center - nearest) - self.radius)


@dataclass(frozen=True)
class ConvexPolygon(ObjectShape):
    vertices: Tuple[Tuple[float, float], ...]
    """Counter-clockwise vertex list (mm)"""

    def __attrs_post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError(f"Polygon needs at least three 2D vertices, got {self.vertices}")
        edges = np.roll(v, -1, axis=0) - v
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if not (cross > 0).all():
            raise ValueError("Polygon vertices must be counter-clockwise and strictly convex")

    @property
    def interior_point(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float).mean(axis=0)

    def _edges(self) -> Tuple[np.ndarray, np.ndarray]:
        v = np.asarray(self.vertices, dtype=float)
        edges = np.roll(v, -1, axis=0) - v
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=-1)
        return v, normals / np.linalg.norm(normals, axis=-1, keepdims=True)

    def _depth(self, segment: Segment) -> float:
        # inside depth along the segment is the lower envelope of one affine
        # function per edge; its maximum sits at an end or a crossing
        start, end = segment
        v, normals = self._edges()
        offset = np.einsum("ij,ij->i", normals, v - start)
        slope = -(normals @ (end - start))
        candidates = [0.0, 1.0]
        for i in range(len(v)):
            for j in range(i + 1, len(v)):
                if slope[i] != slope[j]:
                    t = (offset[j] - offset[i]) / (slope[i] - slope[j])
                    if 0.0 < t < 1.0:
                        candidates.append(float(t))
        t = np.array(candidates)
        return float(np.max(np.min(offset[:, None] + slope[:, None] * t[None, :], axis=0)))

    def signed_distance(self, segment: Segment) -> float:
        depth = self._depth(segment)
        if depth > 0:
            return -depth
        v = np.asarray(self.vertices, dtype=float)
        distances = [np.linalg.norm(p - closest_point(p, segment)[0]) for p in v]
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            distances.extend(np.linalg.norm(p - closest_point(p, (a, b))[0]) for p in segment)
        return float(min(distances))


@dataclass(frozen=True)
class ContactSet:
    gaps: Dict[str, float]
    """Signed gap per phalange (mm), positive when separated"""
    tolerance: float = CONTACT_TOLERANCE

    @property
    def active(self) -> Tuple[str, ...]:
        return tuple(name for name in PHALANGES if self.gaps[name] <= self.tolerance)

    def penetration(self, phalange: str) -> float:
        return max(0.0, -self.gaps[phalange])


def detect_contact(
    pose: FingerPose,
    obj: Optional[ObjectShape],
    tolerance: float = CONTACT_TOLERANCE,
    q_o1_ref: float = Q_O1_REF,
) -> ContactSet:
    """Signed gaps between each phalange and the object; no object means infinite gaps."""
    if obj is None:
        return ContactSet(gaps={name: np.inf for name in PHALANGES}, tolerance=tolerance)
    segments = phalange_segments(pose, q_o1_ref)
    return ContactSet(gaps={name: obj.signed_distance(segments[name]) for name in PHALANGES}, tolerance=tolerance)


def object_from_spec(spec: str) -> ObjectShape:
    """Parse `disc:x,y,r` or `polygon:x1,y1;x2,y2;...` (mm)."""
    kind, _, body = spec.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "disc":
            x, y, r = (float(value) for value in body.split(","))
            return Disc(center=(x, y), radius=r)
        if kind == "polygon":
            vertices: Sequence[Tuple[float, float]] = [
                tuple(float(value) for value in point.split(",")) for point in body.split(";") if point.strip()
            ]
            return ConvexPolygon(vertices=tuple(vertices))
    except ValueError as e:
        raise ValueError(f"Malformed object spec {spec!r}: {e}") from e
    raise ValueError(f"Unknown object kind {kind!r}, expected disc or polygon")
