from .differential import (
    JacobianBlocks,
    PassiveMap,
    ReducedJacobian,
    assemble_blocks,
    eliminate_passive,
    fd_jacobian_oracle,
    reduced_jacobian,
    state_reduced_jacobian,
)
from .pose_solver import (
    LimitReport,
    SolverSettings,
    check_limits,
    grid_walk,
    solve_pose,
    sweep_workspace,
)
from .statics import (
    ActuatorWrench,
    GraspStability,
    JointTorques,
    actuator_velocity_limits,
    grasp_stability,
    joint_torques,
    power_balance,
    torque_diagnostics,
    torque_ratio,
    workspace_torques,
)

__all__ = [
    'ActuatorWrench',
    'GraspStability',
    'JacobianBlocks',
    'JointTorques',
    'LimitReport',
    'PassiveMap',
    'ReducedJacobian',
    'SolverSettings',
    'actuator_velocity_limits',
    'assemble_blocks',
    'check_limits',
    'eliminate_passive',
    'fd_jacobian_oracle',
    'grasp_stability',
    'grid_walk',
    'joint_torques',
    'power_balance',
    'reduced_jacobian',
    'solve_pose',
    'state_reduced_jacobian',
    'sweep_workspace',
    'torque_diagnostics',
    'torque_ratio',
    'workspace_torques',
]
