from .exceptions import (
    ConfigError,
    ExosynthError,
    GeometryError,
    NoFeasibleCandidate,
    SingularityError,
    SolverError,
    StaticsError,
)
from .kinematics import (
    ActuatorWrench,
    JointTorques,
    SolverSettings,
    fd_jacobian_oracle,
    joint_torques,
    solve_pose,
    state_reduced_jacobian,
    sweep_workspace,
)
from .mechanism import (
    Anthropometry,
    AnthropometryPreset,
    FingerPose,
    Geometry,
    MechanismState,
    load_anthropometry,
    load_geometry,
    reference_geometry,
)
from .simulation import Disc, FingerImpedance, simulate_grasp
from .synthesis import ExhaustiveSearch, SearchSpace, WorkspaceSweepSpec, rank_parameters

__all__ = [
    'ActuatorWrench',
    'Anthropometry',
    'AnthropometryPreset',
    'ConfigError',
    'Disc',
    'ExhaustiveSearch',
    'ExosynthError',
    'FingerImpedance',
    'FingerPose',
    'Geometry',
    'GeometryError',
    'JointTorques',
    'MechanismState',
    'NoFeasibleCandidate',
    'SearchSpace',
    'SingularityError',
    'SolverError',
    'SolverSettings',
    'StaticsError',
    'WorkspaceSweepSpec',
    'fd_jacobian_oracle',
    'joint_torques',
    'load_anthropometry',
    'load_geometry',
    'rank_parameters',
    'reference_geometry',
    'simulate_grasp',
    'solve_pose',
    'state_reduced_jacobian',
    'sweep_workspace',
]
