from .contact import ContactSet, ConvexPolygon, Disc, ObjectShape, detect_contact, object_from_spec
from .grasp import (
    EquilibriumStep,
    FingerImpedance,
    GraspTrace,
    equilibrium_step,
    passed_through,
    simulate_grasp,
    stroke_schedule,
)

__all__ = [
    'ContactSet',
    'ConvexPolygon',
    'Disc',
    'EquilibriumStep',
    'FingerImpedance',
    'GraspTrace',
    'ObjectShape',
    'detect_contact',
    'equilibrium_step',
    'object_from_spec',
    'passed_through',
    'simulate_grasp',
    'stroke_schedule',
]
