"""Flat `name = value` configuration files for geometries and hands.

Lengths are read in mm and angles in degrees; angles are converted to radians
at this boundary. A file may hold geometry keys, anthropometry keys or both.
"""

import logging
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, Optional, Union

from exosynth.exceptions import ConfigError

from .geometry import (
    PRIMITIVE_LENGTHS,
    STATE_FIELDS,
    Anthropometry,
    AnthropometryPreset,
    DbAngle,
    Geometry,
    MechanismState,
)

logger = logging.getLogger(__name__)

FRAME_KEYS = ("l_act", "l_KN", "q_KN", "l_LK", "q_LK")
ANGLE_KEYS = {"q_KN", "q_LK", "q_o1_ref"}
SIGN_KEYS = ("s_BD", "s_BH", "s_FD")
SEED_KEYS = {
    "seed_l_x": "l_x", "seed_c1": "c_1", "seed_c2": "c_2", "seed_q_B": "q_B",
    "seed_q_D": "q_D", "seed_q_G": "q_G", "seed_q_K": "q_K", "seed_q_N": "q_N",
}
ANTHROPOMETRY_KEYS = ("l_ML", "l_p2", "c1_max", "c2_max")
GEOMETRY_KEYS = (
    set(PRIMITIVE_LENGTHS) | set(FRAME_KEYS) | set(SIGN_KEYS)
    | {"db_angle", "q_o1_ref"} | set(SEED_KEYS)
)
KNOWN_KEYS = GEOMETRY_KEYS | set(ANTHROPOMETRY_KEYS)

PathLike = Union[str, Path]


def parse_config(text: str, source: str = "<string>") -> Dict[str, str]:
    """Split config text into raw string values.

    Raises:
        ConfigError: on malformed lines, duplicate or unknown keys.
    """
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected 'name = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{number}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{number}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"{source}:{number}: empty value for {key!r}")
        values[key] = value
    return values


def read_config(path: PathLike) -> Dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    return parse_config(text, source=str(path))


def _number(values: Dict[str, str], key: str, source: str) -> float:
    try:
        number = float(values[key])
    except KeyError:
        raise ConfigError(f"{source}: missing required key {key!r}") from None
    except ValueError:
        raise ConfigError(f"{source}: value of {key!r} is not a number: {values[key]!r}") from None
    if not math.isfinite(number):
        raise ConfigError(f"{source}: value of {key!r} is not finite")
    return math.radians(number) if key in ANGLE_KEYS else number


def _seed(values: Dict[str, str], source: str) -> Optional[MechanismState]:
    if not any(key in values for key in SEED_KEYS):
        return None
    missing = [key for key in SEED_KEYS if key not in values]
    if missing:
        raise ConfigError(f"{source}: incomplete extension seed, missing {', '.join(missing)}")
    seed = {}
    for key, field in SEED_KEYS.items():
        value = _number(values, key, source)
        seed[field] = math.radians(value) if field.startswith("q_") else value
    return MechanismState(**seed)


def geometry_from_values(values: Dict[str, str], source: str = "<string>") -> Geometry:
    kwargs = {key: _number(values, key, source) for key in PRIMITIVE_LENGTHS + FRAME_KEYS}
    for key in SIGN_KEYS:
        if key in values:
            sign = _number(values, key, source)
            if sign not in (1.0, -1.0):
                raise ConfigError(f"{source}: sign {key} must be 1 or -1, got {values[key]!r}")
            kwargs[key] = int(sign)
    if "db_angle" in values:
        try:
            kwargs["db_angle"] = DbAngle(values["db_angle"])
        except ValueError:
            choices = ", ".join(a.value for a in DbAngle)
            raise ConfigError(f"{source}: db_angle must be one of {choices}, got {values['db_angle']!r}") from None
    if "q_o1_ref" in values:
        kwargs["q_o1_ref"] = _number(values, "q_o1_ref", source)
    seed = _seed(values, source)
    if seed is None:
        logger.info(f"{source} has no extension seed, using the reference seed")
        seed = reference_geometry().seed
    try:
        return Geometry(seed=seed, **kwargs)
    except ValueError as e:
        raise ConfigError(f"{source}: {e}") from e


def anthropometry_from_values(values: Dict[str, str], source: str = "<string>") -> Anthropometry:
    kwargs = {}
    for key in ANTHROPOMETRY_KEYS:
        if key in values:
            kwargs[key] = _number(values, key, source)
    for key in ("l_ML", "l_p2"):
        if key not in kwargs:
            raise ConfigError(f"{source}: missing required key {key!r}")
    try:
        return Anthropometry(**kwargs)
    except ValueError as e:
        raise ConfigError(f"{source}: {e}") from e


def _packaged_reference() -> Dict[str, str]:
    with resources.as_file(resources.files("exosynth.mechanism") / "data" / "reference_index.cfg") as path:
        return read_config(path)


@lru_cache(maxsize=None)
def reference_geometry() -> Geometry:
    """The packaged reference index-finger geometry."""
    values = _packaged_reference()
    # packaged file carries its own seed
    return geometry_from_values(values, source="reference_index.cfg")


@lru_cache(maxsize=None)
def reference_anthropometry() -> Anthropometry:
    return anthropometry_from_values(_packaged_reference(), source="reference_index.cfg")


def load_geometry(path: Optional[PathLike] = None) -> Geometry:
    """Load a geometry file, or the packaged reference when `path` is None."""
    if path is None:
        return reference_geometry()
    return geometry_from_values(read_config(path), source=str(path))


def load_anthropometry(source: Optional[PathLike] = None) -> Anthropometry:
    """Resolve a preset name (small, medium, big) or an anthropometry file."""
    if source is None:
        return AnthropometryPreset.MEDIUM.value
    name = str(source)
    if name.strip().upper() in AnthropometryPreset.__members__:
        return AnthropometryPreset.from_name(name).value
    if not Path(name).exists():
        choices = ", ".join(p.name.lower() for p in AnthropometryPreset)
        raise ConfigError(f"Anthropometry {name!r} is neither a preset ({choices}) nor a file")
    return anthropometry_from_values(read_config(name), source=name)


def _format(value: float) -> str:
    return f"{value:.12g}"


def geometry_to_config(geom: Geometry, anthropometry: Optional[Anthropometry] = None) -> str:
    """Render a geometry (and optionally a hand) in the config file format."""
    lines = [f"{key} = {_format(getattr(geom, key))}" for key in PRIMITIVE_LENGTHS]
    lines += [f"{key} = {getattr(geom, key)}" for key in SIGN_KEYS]
    lines.append(f"db_angle = {geom.db_angle.value}")
    for key in FRAME_KEYS + ("q_o1_ref",):
        value = getattr(geom, key)
        lines.append(f"{key} = {_format(math.degrees(value) if key in ANGLE_KEYS else value)}")
    if geom.seed is not None:
        for key, field in SEED_KEYS.items():
            value = getattr(geom.seed, field)
            if field.startswith("q_"):
                value = math.degrees(value)
            lines.append(f"{key} = {_format(value)}")
    if anthropometry is not None:
        lines += [f"{key} = {_format(getattr(anthropometry, key))}" for key in ANTHROPOMETRY_KEYS]
    return "\n".join(lines) + "\n"
