from typing import Dict, Iterator, Optional, Tuple

import attr
import numpy as np
from attr import dataclass

from exosynth.mechanism.config import reference_geometry
from exosynth.mechanism.geometry import WORKSPACE_MCP_MAX, WORKSPACE_PIP_MAX, Geometry

OPTIMIZED_LENGTHS = ("L_EJ", "L_ED", "L_CI", "L_EF", "L_CD", "L_BC")
DEFAULT_RANGES = {
    "L_EJ": (30.0, 40.0),
    "L_ED": (30.0, 40.0),
    "L_CI": (16.0, 20.0),
    "L_EF": (20.0, 35.0),
    "L_CD": (10.0, 20.0),
    "L_BC": (36.0, 46.0),
}
FROZEN_LENGTHS = {"L_KH": 72.0, "L_KB": 35.0, "L_GH": 86.0, "L_AB": 20.0, "L_GF": 36.0}
PUBLISHED_OPTIMUM = {"L_EJ": 37.0, "L_ED": 32.0, "L_CI": 16.0, "L_EF": 30.0, "L_CD": 10.0, "L_BC": 42.0}


def _grid(start: float, stop: float, step: float) -> np.ndarray:
    count = int(np.floor((stop - start) / step + 1e-9))
    values = start + step * np.arange(count + 1)
    if stop - values[-1] > 1e-9:
        values = np.append(values, stop)
    return values


@dataclass(frozen=True)
class SearchSpace:
    """Closed ranges of the optimized lengths (mm), enumerated in lexicographic order."""

    ranges: Dict[str, Tuple[float, float]] = attr.Factory(lambda: dict(DEFAULT_RANGES))
    step: float = 1.0
    frozen: Dict[str, float] = attr.Factory(lambda: dict(FROZEN_LENGTHS))

    def __attrs_post_init__(self):
        if set(self.ranges) != set(OPTIMIZED_LENGTHS):
            raise ValueError(f"Search ranges must cover exactly {', '.join(OPTIMIZED_LENGTHS)}")
        if not self.step > 0:
            raise ValueError(f"Search step must be positive, got {self.step}")
        for name, (low, high) in self.ranges.items():
            if not 0 < low <= high:
                raise ValueError(f"Range of {name} must satisfy 0 < low <= high, got ({low}, {high})")

    @classmethod
    def single_point(cls, lengths: Dict[str, float], **kwargs) -> "SearchSpace":
        return cls(ranges={name: (lengths[name], lengths[name]) for name in OPTIMIZED_LENGTHS}, **kwargs)

    def values(self, name: str) -> np.ndarray:
        low, high = self.ranges[name]
        return _grid(low, high, self.step)

    @property
    def cardinality(self) -> int:
        return int(np.prod([len(self.values(name)) for name in OPTIMIZED_LENGTHS]))

    def lengths_array(self) -> np.ndarray:
        """All candidates as rows of OPTIMIZED_LENGTHS values, row index = candidate id."""
        axes = np.meshgrid(*(self.values(name) for name in OPTIMIZED_LENGTHS), indexing="ij")
        return np.stack([axis.ravel() for axis in axes], axis=-1)


@dataclass(frozen=True)
class WorkspaceSweepSpec:
    """Grid of finger poses (deg) every candidate is checked on."""

    mcp_stop: float = WORKSPACE_MCP_MAX
    pip_stop: float = WORKSPACE_PIP_MAX
    step: float = 10.0
    mcp_start: float = 0.0
    pip_start: float = 0.0

    def __attrs_post_init__(self):
        if not self.step > 0:
            raise ValueError(f"Sweep step must be positive, got {self.step}")
        if not 0 <= self.mcp_start <= self.mcp_stop or not 0 <= self.pip_start <= self.pip_stop:
            raise ValueError("Sweep bounds must satisfy 0 <= start <= stop")

    @classmethod
    def single_pose(cls, theta_mcp: float, theta_pip: float) -> "WorkspaceSweepSpec":
        return cls(mcp_start=theta_mcp, mcp_stop=theta_mcp, pip_start=theta_pip, pip_stop=theta_pip)

    def mcp_values(self) -> np.ndarray:
        return _grid(self.mcp_start, self.mcp_stop, self.step)

    def pip_values(self) -> np.ndarray:
        return _grid(self.pip_start, self.pip_stop, self.step)

    @property
    def n_poses(self) -> int:
        return len(self.mcp_values()) * len(self.pip_values())


def compose_candidate(lengths: Dict[str, float], space: SearchSpace, base: Geometry) -> Geometry:
    """Candidate geometry: optimized lengths plus the frozen ones on `base`'s frame."""
    return base.replace(**space.frozen, **{name: float(lengths[name]) for name in OPTIMIZED_LENGTHS})


def enumerate_grid(space: SearchSpace, base: Optional[Geometry] = None) -> Iterator[Geometry]:
    """Yield every candidate geometry in lexicographic order of OPTIMIZED_LENGTHS."""
    base = base or reference_geometry()
    for row in space.lengths_array():
        yield compose_candidate(dict(zip(OPTIMIZED_LENGTHS, row)), space, base)
