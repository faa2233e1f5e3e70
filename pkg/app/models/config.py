import logging
import math
from pathlib import Path
from typing import Any, Dict, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.utils.errors import ConfigError
from app.utils.units import db_to_linear

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299792458.0

CONFIG_KEYS = (
    "noise_power_dbm",
    "chan_est_err_var_db",
    "propagated_noise_var_dbm",
    "repeater_user_chan_var_db",
    "composite_chan_var_db",
    "rcs_var_db",
    "target_angle_deg",
    "target_distance_m",
    "num_antennas",
    "num_time_samples",
    "num_subcarriers",
    "subcarrier_spacing_hz",
    "max_power",
    "min_user_sinr_db",
)

_VARIANCE_KEYS = (
    "noise_power_dbm",
    "chan_est_err_var_db",
    "propagated_noise_var_dbm",
    "repeater_user_chan_var_db",
    "composite_chan_var_db",
    "rcs_var_db",
)


class SystemConfig(BaseModel):
    """
    Physical and simulation parameters.

    Values are stored in the units of the configuration document (dB, dBm,
    degrees); the properties expose the linear-domain quantities every
    computation works with. dB and dBm share the same 10^(x/10) mapping.
    """

    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    noise_power_dbm: float
    chan_est_err_var_db: float
    propagated_noise_var_dbm: float
    repeater_user_chan_var_db: float
    composite_chan_var_db: float
    rcs_var_db: float
    target_angle_deg: float
    target_distance_m: float = Field(gt=0)
    num_antennas: int = Field(ge=1)
    num_time_samples: int = Field(ge=1)
    num_subcarriers: int = Field(ge=1)
    subcarrier_spacing_hz: float = Field(gt=0)
    max_power: float = Field(gt=0)
    min_user_sinr_db: float

    @model_validator(mode="after")
    def _variances_positive(self) -> "SystemConfig":
        for key in _VARIANCE_KEYS:
            if db_to_linear(getattr(self, key)) <= 0.0:
                raise ValueError(f"{key} underflows to zero in the linear domain")
        if db_to_linear(self.min_user_sinr_db) <= 0.0:
            raise ValueError("min_user_sinr_db underflows to zero in the linear domain")
        return self

    @property
    def noise_power(self) -> float:
        return db_to_linear(self.noise_power_dbm)

    @property
    def chan_est_err_var(self) -> float:
        return db_to_linear(self.chan_est_err_var_db)

    @property
    def propagated_noise_var(self) -> float:
        return db_to_linear(self.propagated_noise_var_dbm)

    @property
    def repeater_user_chan_var(self) -> float:
        return db_to_linear(self.repeater_user_chan_var_db)

    @property
    def composite_chan_var(self) -> float:
        return db_to_linear(self.composite_chan_var_db)

    @property
    def rcs_var(self) -> float:
        return db_to_linear(self.rcs_var_db)

    @property
    def target_angle(self) -> float:
        return math.radians(self.target_angle_deg)

    @property
    def target_distance(self) -> float:
        return self.target_distance_m

    @property
    def subcarrier_spacing(self) -> float:
        return self.subcarrier_spacing_hz

    @property
    def min_user_sinr(self) -> float:
        return db_to_linear(self.min_user_sinr_db)

    @property
    def speed_of_light(self) -> float:
        return SPEED_OF_LIGHT

    def with_overrides(self, **updates: Any) -> "SystemConfig":
        for key in updates:
            if key not in CONFIG_KEYS:
                raise ConfigError("unknown configuration key", key=key)
        try:
            return SystemConfig(**{**self.model_dump(), **updates})
        except ValidationError as e:
            raise _as_config_error(e, lines={}) from e


def _as_config_error(error: ValidationError, lines: Dict[str, int]) -> ConfigError:
    first = error.errors()[0]
    key = str(first["loc"][0]) if first["loc"] else None
    return ConfigError(first["msg"], key=key, line=lines.get(key) if key else None)


def load_config(source: str) -> SystemConfig:
    """Parse a `key = value` document (one entry per line, `#` comments)."""
    values: Dict[str, float] = {}
    lines: Dict[str, int] = {}

    for line_no, raw in enumerate(source.splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"expected 'key = value', got '{text}'", line=line_no)

        key, value = (part.strip() for part in text.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError("unknown configuration key", key=key, line=line_no)
        if key in values:
            raise ConfigError(
                f"duplicate key (first defined on line {lines[key]})", key=key, line=line_no
            )
        try:
            values[key] = float(value)
        except ValueError:
            raise ConfigError(f"non-numeric value '{value}'", key=key, line=line_no) from None
        lines[key] = line_no

    for key in CONFIG_KEYS:
        if key not in values:
            raise ConfigError("missing required key", key=key)

    try:
        config = SystemConfig(**values)
    except ValidationError as e:
        raise _as_config_error(e, lines) from e

    logger.debug(f"Loaded configuration with {len(values)} keys")
    return config


def load_config_file(path: Union[str, Path]) -> SystemConfig:
    path = Path(path)
    try:
        source = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read configuration file {path}: {e}") from e

    config = load_config(source)
    logger.info(f"Loaded configuration from {path}")
    return config


def dump_config(config: SystemConfig) -> str:
    data = config.model_dump()
    return "".join(f"{key} = {data[key]!r}\n" for key in CONFIG_KEYS)


DEFAULT_PARAMETERS: Dict[str, float] = {
    "noise_power_dbm": -94.0,
    "chan_est_err_var_db": -20.0,
    "propagated_noise_var_dbm": -198.0,
    "repeater_user_chan_var_db": -80.0,
    "composite_chan_var_db": -184.0,
    "rcs_var_db": 10.0,
    "target_angle_deg": 30.0,
    "target_distance_m": 400.0,
    "num_antennas": 64,
    "num_time_samples": 128,
    "num_subcarriers": 128,
    "subcarrier_spacing_hz": 120e3,
    "max_power": 1e7,
    "min_user_sinr_db": 2.0,
}


def default_config(**overrides: Any) -> SystemConfig:
    """Built-in system parameters with the 400 m / 2 dB / 10 dB scenario defaults."""
    return SystemConfig(**DEFAULT_PARAMETERS).with_overrides(**overrides)
