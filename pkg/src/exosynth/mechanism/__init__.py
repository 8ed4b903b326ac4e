from .config import (
    geometry_to_config,
    load_anthropometry,
    load_geometry,
    reference_anthropometry,
    reference_geometry,
)
from .frame import ExtensionChoice, extension_frame
from .geometry import (
    DEVICE,
    Anthropometry,
    AnthropometryPreset,
    DbAngle,
    DerivedSegments,
    FingerPose,
    Geometry,
    MechanismState,
    anatomical_to_internal,
    composite_lengths,
    internal_to_anatomical,
    validate_rom,
)
from .loops import loop_jacobian, loop_residuals

__all__ = [
    'DEVICE',
    'Anthropometry',
    'AnthropometryPreset',
    'DbAngle',
    'DerivedSegments',
    'ExtensionChoice',
    'FingerPose',
    'Geometry',
    'MechanismState',
    'anatomical_to_internal',
    'composite_lengths',
    'extension_frame',
    'geometry_to_config',
    'internal_to_anatomical',
    'load_anthropometry',
    'load_geometry',
    'loop_jacobian',
    'loop_residuals',
    'reference_anthropometry',
    'reference_geometry',
    'validate_rom',
]
