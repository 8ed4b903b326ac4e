from __future__ import annotations

import math
from pathlib import Path

import pytest

from exosynth.exceptions import ConfigError
from exosynth.mechanism.config import (
    geometry_to_config,
    load_anthropometry,
    load_geometry,
    parse_config,
    reference_anthropometry,
)
from exosynth.mechanism.geometry import AnthropometryPreset, DbAngle, Geometry


def test_reference_geometry_values(geometry: Geometry) -> None:
    assert geometry.L_EJ == 37.0
    assert geometry.L_BC == 42.0
    assert (geometry.s_BD, geometry.s_BH, geometry.s_FD) == (-1, -1, 1)
    assert geometry.db_angle is DbAngle.CORRECTED_QB
    assert geometry.q_o1_ref == pytest.approx(math.pi)
    assert geometry.seed.l_x == 0.0
    assert geometry.seed.c_1 == 16.0
    assert geometry.seed.q_B == pytest.approx(math.radians(-22.0))
    assert geometry.seed.q_N == pytest.approx(math.radians(157.5))


def test_reference_anthropometry_is_medium() -> None:
    assert reference_anthropometry() == AnthropometryPreset.MEDIUM.value


def test_load_geometry_defaults_to_reference(geometry: Geometry) -> None:
    assert load_geometry() is geometry


def test_comments_and_blank_lines() -> None:
    values = parse_config("# header\n\nL_AB = 20  # trailing\n   \nl_ML=50\n")
    assert values == {"L_AB": "20", "l_ML": "50"}


@pytest.mark.parametrize(
    "text, message",
    [
        ("L_AB 20\n", "expected 'name = value'"),
        ("L_XY = 1\n", "unknown key"),
        ("L_AB = 1\nL_AB = 2\n", "duplicate key"),
        ("L_AB =\n", "empty value"),
    ],
)
def test_malformed_text(text: str, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_round_trip_through_file(tmp_path: Path, geometry: Geometry) -> None:
    path = tmp_path / "copy.cfg"
    path.write_text(geometry_to_config(geometry, AnthropometryPreset.BIG.value), encoding="utf-8")
    loaded = load_geometry(path)
    for name, value in geometry.primitive_lengths().items():
        assert getattr(loaded, name) == pytest.approx(value, abs=1e-9)
    for name in ("l_act", "l_KN", "q_KN", "l_LK", "q_LK", "q_o1_ref"):
        assert getattr(loaded, name) == pytest.approx(getattr(geometry, name), abs=1e-9)
    assert loaded.seed.as_array() == pytest.approx(geometry.seed.as_array(), abs=1e-9)
    assert (loaded.s_BD, loaded.db_angle) == (geometry.s_BD, geometry.db_angle)
    assert load_anthropometry(path) == AnthropometryPreset.BIG.value


def _without(text: str, key: str) -> str:
    return "\n".join(line for line in text.splitlines() if not line.startswith(f"{key} ")) + "\n"


def test_missing_key(tmp_path: Path, geometry: Geometry) -> None:
    path = tmp_path / "broken.cfg"
    path.write_text(_without(geometry_to_config(geometry), "L_CD"), encoding="utf-8")
    with pytest.raises(ConfigError, match="missing required key 'L_CD'"):
        load_geometry(path)


def test_incomplete_seed(tmp_path: Path, geometry: Geometry) -> None:
    path = tmp_path / "seedless.cfg"
    path.write_text(_without(geometry_to_config(geometry), "seed_q_G"), encoding="utf-8")
    with pytest.raises(ConfigError, match="seed_q_G"):
        load_geometry(path)


def test_missing_seed_falls_back_to_reference(tmp_path: Path, geometry: Geometry) -> None:
    text = "\n".join(line for line in geometry_to_config(geometry).splitlines() if not line.startswith("seed_"))
    path = tmp_path / "noseed.cfg"
    path.write_text(text + "\n", encoding="utf-8")
    assert load_geometry(path).seed == geometry.seed


def test_bad_values(tmp_path: Path, geometry: Geometry) -> None:
    text = geometry_to_config(geometry)
    cases = {
        "nan.cfg": text.replace("L_AB = 20", "L_AB = twenty"),
        "sign.cfg": text.replace("s_FD = 1", "s_FD = 2"),
        "angle.cfg": text.replace("db_angle = corrected_qB", "db_angle = sideways"),
        "negative.cfg": text.replace("L_GF = 36", "L_GF = -36"),
    }
    for name, body in cases.items():
        path = tmp_path / name
        path.write_text(body, encoding="utf-8")
        with pytest.raises(ConfigError):
            load_geometry(path)


def test_unreadable_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="Cannot read"):
        load_geometry(tmp_path / "absent.cfg")


def test_anthropometry_sources(tmp_path: Path) -> None:
    assert load_anthropometry() == AnthropometryPreset.MEDIUM.value
    assert load_anthropometry("small").l_ML == 45.0
    path = tmp_path / "hand.cfg"
    path.write_text("l_ML = 48\nl_p2 = 29\nc2_max = 38\n", encoding="utf-8")
    hand = load_anthropometry(path)
    assert (hand.l_ML, hand.l_p2, hand.c1_max, hand.c2_max) == (48.0, 29.0, 50.0, 38.0)
    with pytest.raises(ConfigError, match="neither a preset"):
        load_anthropometry("enormous")
    partial = tmp_path / "partial.cfg"
    partial.write_text("l_ML = 48\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="l_p2"):
        load_anthropometry(partial)
