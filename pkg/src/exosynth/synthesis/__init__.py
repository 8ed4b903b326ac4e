from .exhaustive_search import (
    CandidateReport,
    ExhaustiveSearch,
    FilterResult,
    FrameGates,
    OptimizationResult,
    cost,
    elimination_summary,
    evaluate_chunk,
    frame_gates,
    p_curve,
    prefilter_linear,
    prefilter_static,
    rank_candidates,
    sweep_candidates,
    verify_candidate,
)
from .search_space import (
    OPTIMIZED_LENGTHS,
    PUBLISHED_OPTIMUM,
    SearchSpace,
    WorkspaceSweepSpec,
    compose_candidate,
    enumerate_grid,
)
from .sensitivity import (
    SensitivityRecord,
    bar_plot_data,
    oat_sensitivity,
    partition_parameters,
    rank_parameters,
    retained_set_diagnostic,
    sensitivity_index,
    sensitivity_table,
)

__all__ = [
    'OPTIMIZED_LENGTHS',
    'PUBLISHED_OPTIMUM',
    'CandidateReport',
    'ExhaustiveSearch',
    'FilterResult',
    'FrameGates',
    'OptimizationResult',
    'SearchSpace',
    'SensitivityRecord',
    'WorkspaceSweepSpec',
    'bar_plot_data',
    'compose_candidate',
    'cost',
    'elimination_summary',
    'enumerate_grid',
    'evaluate_chunk',
    'frame_gates',
    'oat_sensitivity',
    'p_curve',
    'partition_parameters',
    'prefilter_linear',
    'prefilter_static',
    'rank_candidates',
    'rank_parameters',
    'retained_set_diagnostic',
    'sensitivity_index',
    'sensitivity_table',
    'sweep_candidates',
    'verify_candidate',
]
