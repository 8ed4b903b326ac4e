"""One-at-a-time sensitivity of the slider travels to each link length."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from attr import dataclass
from tqdm.auto import tqdm

from exosynth.exceptions import ExosynthError, UnsolvablePerturbation
from exosynth.kinematics.pose_solver import SolverSettings, solve_pose
from exosynth.mechanism.geometry import PRIMITIVE_LENGTHS, FingerPose, Geometry
from exosynth.utils import worker_count

logger = logging.getLogger(__name__)

REPRESENTATIVE_POSE = (40.0, 45.0)
"""Default (MCP, PIP) pose of the study in degrees"""
RETAIN_THRESHOLD = 0.1
PUBLISHED_RETAINED = ("L_EJ", "L_CI", "L_EF", "L_ED", "L_CD", "L_BC")


@dataclass(frozen=True)
class SensitivityRecord:
    parameter: str
    si_c1: float
    si_c2: float
    si_g: float
    e1: float
    """Lowered parameter value (mm)"""
    e2: float
    """Raised parameter value (mm)"""
    s_c1: Tuple[float, float]
    """c_1 at (e1, e2) in mm"""
    s_c2: Tuple[float, float]
    error: Optional[str] = None
    """Why the perturbation could not be evaluated, if it failed"""

    @property
    def failed(self) -> bool:
        return self.error is not None


def sensitivity_index(e1: float, e2: float, s1: float, s2: float) -> float:
    """Relative output change over relative input change."""
    if e1 == e2:
        raise ValueError(f"Input values must differ, got {e1} twice")
    s_av = (s1 + s2) / 2
    e_av = (e1 + e2) / 2
    if s_av == 0:
        raise ValueError("Output average is zero, the relative change is undefined")
    return ((s2 - s1) / s_av) / ((e2 - e1) / e_av)


def generic_index(si_c1: float, si_c2: float) -> float:
    """Combine both slider indices; negative when the sliders respond in opposite directions."""
    return float(np.sign(si_c1) * np.sign(si_c2) * math.hypot(si_c1, si_c2))


def _slider_travels(geom: Geometry, poses: Sequence[FingerPose], settings: SolverSettings) -> Tuple[float, float]:
    states = [solve_pose(pose, geom, settings=settings) for pose in poses]
    return float(np.mean([s.c_1 for s in states])), float(np.mean([s.c_2 for s in states]))


def oat_sensitivity(
    geom: Geometry,
    param: str,
    pose: FingerPose,
    delta: float = 0.10,
    settings: Optional[SolverSettings] = None,
    poses: Optional[Sequence[FingerPose]] = None,
) -> SensitivityRecord:
    """Perturb one primitive length by +-delta and measure the slider travels.

    Args:
        geom: Baseline geometry.
        param: Name of a primitive length.
        pose: Pose at which c_1 and c_2 are read.
        delta: Relative perturbation, 0.1 for +-10%.
        settings: Solver settings.
        poses: When given, c_1 and c_2 are averaged over these poses instead of
            read at `pose` alone.

    Raises:
        UnsolvablePerturbation: if either perturbed geometry fails to close.
    """
    if param not in PRIMITIVE_LENGTHS:
        raise ValueError(f"{param!r} is not a primitive length, expected one of {', '.join(PRIMITIVE_LENGTHS)}")
    if not 0 < delta < 1:
        raise ValueError(f"Perturbation fraction must be in (0, 1), got {delta}")
    settings = settings or SolverSettings()
    poses = list(poses) if poses else [pose]

    baseline = getattr(geom, param)
    e1, e2 = (1 - delta) * baseline, (1 + delta) * baseline
    travels = []
    for value in (e1, e2):
        try:
            travels.append(_slider_travels(geom.replace(**{param: value}), poses, settings))
        except (ExosynthError, ValueError) as e:
            raise UnsolvablePerturbation(param, e) from e
    (c1_low, c2_low), (c1_high, c2_high) = travels

    si_c1 = sensitivity_index(e1, e2, c1_low, c1_high)
    si_c2 = sensitivity_index(e1, e2, c2_low, c2_high)
    return SensitivityRecord(
        parameter=param,
        si_c1=si_c1,
        si_c2=si_c2,
        si_g=generic_index(si_c1, si_c2),
        e1=e1,
        e2=e2,
        s_c1=(c1_low, c1_high),
        s_c2=(c2_low, c2_high),
    )


@dataclass(frozen=True)
class _PerturbationTask:
    geom: Geometry
    param: str
    pose: FingerPose
    delta: float
    settings: Optional[SolverSettings]
    poses: Optional[Tuple[FingerPose, ...]]


def perturbation_record(task: _PerturbationTask) -> SensitivityRecord:
    """Sensitivity record of one parameter; a failed perturbation gives NaN indices and the message."""
    try:
        return oat_sensitivity(task.geom, task.param, task.pose, task.delta, task.settings, task.poses)
    except UnsolvablePerturbation as e:
        value = getattr(task.geom, task.param)
        return SensitivityRecord(
            parameter=task.param, si_c1=math.nan, si_c2=math.nan, si_g=math.nan,
            e1=(1 - task.delta) * value, e2=(1 + task.delta) * value,
            s_c1=(math.nan, math.nan), s_c2=(math.nan, math.nan), error=str(e),
        )


def _sort_key(record: SensitivityRecord):
    # failures and NaN last, then descending SI_g, name breaks ties
    missing = record.failed or math.isnan(record.si_g)
    return (missing, 0.0 if missing else -record.si_g, record.parameter)


def rank_parameters(
    geom: Geometry,
    pose: FingerPose,
    delta: float = 0.10,
    parameters: Sequence[str] = PRIMITIVE_LENGTHS,
    settings: Optional[SolverSettings] = None,
    poses: Optional[Sequence[FingerPose]] = None,
    show_progress: bool = False,
    workers: Optional[int] = None,
) -> List[SensitivityRecord]:
    """Sensitivity records for every parameter, sorted by SI_g descending.

    A parameter whose perturbation does not close is kept in the result with
    NaN indices and the failure message. Parameters are perturbed in
    `workers` processes (see `worker_count`); the ranking does not depend on
    the worker count.
    """
    tasks = [
        _PerturbationTask(
            geom=geom, param=param, pose=pose, delta=delta, settings=settings,
            poses=tuple(poses) if poses else None,
        )
        for param in parameters
    ]
    workers = worker_count(workers)
    progress = tqdm(total=len(tasks), desc="Perturbing lengths", disable=not show_progress)
    records = []
    if workers == 1 or len(tasks) <= 1:
        for task in tasks:
            records.append(perturbation_record(task))
            progress.update()
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as executor:
            for record in executor.map(perturbation_record, tasks):
                records.append(record)
                progress.update()
    progress.close()
    for record in records:
        if record.failed:
            logger.warning(record.error)
    return sorted(records, key=_sort_key)


def partition_parameters(
    records: Sequence[SensitivityRecord],
    threshold: float = RETAIN_THRESHOLD,
) -> Tuple[List[str], List[str]]:
    """Split parameter names into (retained, frozen); SI_g above `threshold` is retained."""
    retained = [r.parameter for r in records if not r.failed and r.si_g > threshold]
    frozen = [r.parameter for r in records if r.parameter not in retained]
    return retained, frozen


def retained_set_diagnostic(records: Sequence[SensitivityRecord], threshold: float = RETAIN_THRESHOLD) -> Dict:
    """Compare the retained set with the six lengths the prototype was optimized over."""
    retained, frozen = partition_parameters(records, threshold)
    missing = [name for name in PUBLISHED_RETAINED if name not in retained]
    extra = [name for name in retained if name not in PUBLISHED_RETAINED]
    frozen_signs = {
        r.parameter: ("failed" if r.failed else "+" if r.si_g > 0 else "-" if r.si_g < 0 else "0")
        for r in records if r.parameter not in PUBLISHED_RETAINED
    }
    if missing:
        logger.warning(f"retained set misses {', '.join(missing)} of the published optimization variables")
    return {"missing": missing, "extra": extra, "frozen_signs": frozen_signs, "reproduced": not missing}


def sensitivity_table(records: Sequence[SensitivityRecord], threshold: float = RETAIN_THRESHOLD) -> pd.DataFrame:
    retained, _ = partition_parameters(records, threshold)
    rows = [
        {
            "parameter": r.parameter,
            "E1": r.e1,
            "E2": r.e2,
            "c1_E1": r.s_c1[0],
            "c1_E2": r.s_c1[1],
            "c2_E1": r.s_c2[0],
            "c2_E2": r.s_c2[1],
            "SI_c1": r.si_c1,
            "SI_c2": r.si_c2,
            "SI_g": r.si_g,
            "retained": r.parameter in retained,
            "error": r.error or "",
        }
        for r in records
    ]
    columns = ["parameter", "E1", "E2", "c1_E1", "c1_E2", "c2_E1", "c2_E2", "SI_c1", "SI_c2", "SI_g", "retained", "error"]
    return pd.DataFrame(rows, columns=columns)


def bar_plot_data(records: Sequence[SensitivityRecord]) -> pd.DataFrame:
    """Per-parameter slider indices in primitive-length order, ready for a grouped bar chart."""
    by_name = {r.parameter: r for r in records}
    order = [name for name in PRIMITIVE_LENGTHS if name in by_name]
    return pd.DataFrame(
        {
            "parameter": order,
            "SI_c1": [by_name[name].si_c1 for name in order],
            "SI_c2": [by_name[name].si_c2 for name in order],
        }
    )
