from pathlib import Path

import pytest
from pydantic import ValidationError

from app.models.config import (
    CONFIG_KEYS,
    DEFAULT_PARAMETERS,
    default_config,
    dump_config,
    load_config,
    load_config_file,
)
from app.utils.errors import ConfigError

DEFAULT_DOCUMENT = "\n".join(f"{key} = {value}" for key, value in DEFAULT_PARAMETERS.items())


def _without(key):
    return "\n".join(line for line in DEFAULT_DOCUMENT.splitlines() if not line.startswith(key))


def test_load_default_document():
    cfg = load_config(DEFAULT_DOCUMENT)

    assert cfg.num_antennas == 64
    assert cfg.num_time_samples == 128
    assert cfg.num_subcarriers == 128
    assert cfg.noise_power == pytest.approx(10 ** (-9.4), rel=1e-12)
    assert cfg.chan_est_err_var == pytest.approx(0.01, rel=1e-12)
    assert cfg.repeater_user_chan_var == pytest.approx(1e-8, rel=1e-12)
    assert cfg.composite_chan_var == pytest.approx(10 ** (-18.4), rel=1e-12)
    assert cfg.rcs_var == pytest.approx(10.0, rel=1e-12)
    assert cfg.target_angle == pytest.approx(0.5235987755982988)
    assert cfg.subcarrier_spacing == 120e3


def test_bundled_config_file_matches_defaults():
    path = Path(__file__).resolve().parent.parent / "configs" / "default.conf"
    assert load_config_file(path) == default_config()


def test_comments_and_blank_lines_are_ignored():
    source = "# header\n\n" + DEFAULT_DOCUMENT.replace("num_antennas = 64", "num_antennas = 8  # small")
    assert load_config(source).num_antennas == 8


def test_missing_key():
    with pytest.raises(ConfigError, match="key 'num_antennas'.*missing required key") as info:
        load_config(_without("num_antennas"))
    assert info.value.key == "num_antennas"


def test_negative_distance_is_invariant_violation():
    source = DEFAULT_DOCUMENT.replace("target_distance_m = 400.0", "target_distance_m = -1")

    with pytest.raises(ConfigError) as info:
        load_config(source)

    assert info.value.key == "target_distance_m"
    assert info.value.line == list(DEFAULT_PARAMETERS).index("target_distance_m") + 1


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="key 'carrier_hz', line 15: unknown"):
        load_config(DEFAULT_DOCUMENT + "\ncarrier_hz = 28e9")


def test_duplicate_key():
    with pytest.raises(ConfigError, match="duplicate key"):
        load_config(DEFAULT_DOCUMENT + "\nnum_antennas = 8")


def test_non_numeric_value():
    source = DEFAULT_DOCUMENT.replace("num_antennas = 64", "num_antennas = many")
    with pytest.raises(ConfigError, match="non-numeric value 'many'"):
        load_config(source)


def test_line_without_separator():
    with pytest.raises(ConfigError, match="line 1: expected 'key = value'"):
        load_config("num_antennas 64\n" + DEFAULT_DOCUMENT)


def test_fractional_count_is_rejected():
    source = DEFAULT_DOCUMENT.replace("num_subcarriers = 128", "num_subcarriers = 2.5")
    with pytest.raises(ConfigError, match="num_subcarriers"):
        load_config(source)


def test_infinite_variance_is_rejected():
    source = DEFAULT_DOCUMENT.replace("rcs_var_db = 10.0", "rcs_var_db = inf")
    with pytest.raises(ConfigError, match="rcs_var_db"):
        load_config(source)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read configuration file"):
        load_config_file("/nonexistent/ncr-isac.conf")


def test_dump_reloads_to_same_config():
    cfg = default_config(num_antennas=8, max_power=3.5e8)
    assert load_config(dump_config(cfg)) == cfg


def test_with_overrides_revalidates():
    cfg = default_config()

    assert cfg.with_overrides(min_user_sinr_db=4.0).min_user_sinr_db == 4.0
    assert cfg.min_user_sinr_db == 2.0
    with pytest.raises(ConfigError, match="target_distance_m"):
        cfg.with_overrides(target_distance_m=0.0)
    with pytest.raises(ConfigError, match="unknown configuration key"):
        cfg.with_overrides(carrier_hz=28e9)


def test_config_is_frozen():
    cfg = default_config()
    with pytest.raises(ValidationError):
        cfg.num_antennas = 4


def test_every_key_is_declared():
    assert set(CONFIG_KEYS) == set(DEFAULT_PARAMETERS)
