"""Configuration management using Pydantic"""
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings

from core.errors import ConfigError, StorageError


class Settings(BaseSettings):
    """Process-level settings"""

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = True

    # Execution
    WORKERS: int = Field(default=1, ge=1)

    # Paths
    RESULTS_DIR: str = "results"
    DEFAULT_CONFIG_PATH: str = "configs/default.yml"

    # File formats
    CSV_SCHEMA_VERSION: int = 1
    INSTANCE_SCHEMA_VERSION: int = 1
    CHECKPOINT_VERSION: int = 1

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()


def _dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


class EnergyParams(BaseModel):
    """
    Physical constants of the UAV-IoT system plus the weighting coefficient

    Defaults reproduce the simulation table: 21 dBm CH power, 1 MHz bandwidth,
    -174 dBm/Hz noise density, 2 GHz carrier, H = 50 m, 500 g quadrotor, 15 m/s.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Channel
    eta: float = Field(default=10.0, gt=0)
    beta: float = Field(default=0.03, gt=0)
    path_loss_exponent: float = Field(default=3.0, gt=0)
    carrier_freq: float = Field(default=2e9, gt=0, description="Hz")
    light_speed: float = Field(default=3e8, gt=0, description="m/s")
    mu_los: float = Field(default=1.0, ge=0, description="dB")
    mu_nlos: float = Field(default=20.0, ge=0, description="dB")
    ch_tx_power: float = Field(default=_dbm_to_watts(21.0), gt=0, description="W")
    bandwidth: float = Field(default=1e6, gt=0, description="Hz")
    noise_density: float = Field(default=-174.0, description="dBm/Hz")
    altitude: float = Field(default=50.0, gt=0, description="m")

    # UAV propulsion
    uav_mass: float = Field(default=0.5, gt=0, description="kg")
    gravity: float = Field(default=9.8, gt=0, description="m/s^2")
    prop_radius: float = Field(default=0.2, gt=0, description="m")
    prop_count: int = Field(default=4, gt=0)
    air_density: float = Field(default=1.225, gt=0, description="kg/m^3")
    p_full: float = Field(default=5.0, gt=0, description="W")
    p_static: float = Field(default=0.0, ge=0, description="W")
    v_full: float = Field(default=15.0, gt=0, description="m/s")
    v_uav: float = Field(default=15.0, gt=0, description="m/s")
    p_com: float = Field(default=0.0126, gt=0, description="W")

    # Ground radio
    e_elec: float = Field(default=50e-9, gt=0, description="J/bit")
    eps_fs: float = Field(default=10e-12, gt=0, description="J/bit/m^2")
    eps_mp: float = Field(default=0.0013e-12, gt=0, description="J/bit/m^4")
    msg_bits: float = Field(default=8e6, gt=0, description="bits")

    omega: float = Field(default=0.5, ge=0, le=1)

    @model_validator(mode="after")
    def _check_speeds(self) -> "EnergyParams":
        if self.v_uav > self.v_full:
            raise ValueError(f"v_uav ({self.v_uav}) must not exceed v_full ({self.v_full})")
        return self

    def with_omega(self, omega: float) -> "EnergyParams":
        return build_energy_params({**self.model_dump(), "omega": omega})

    def fingerprint(self) -> str:
        """Short hash identifying this parameter set"""
        canonical = json.dumps(self.model_dump(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


class AcoConfig(BaseModel):
    """Ant colony hyper-parameters"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_ants: int = Field(default=30, ge=1)
    n_iterations: int = Field(default=200, ge=1)
    evaporation: float = Field(default=0.1, gt=0, lt=1)
    pheromone_weight: float = Field(default=1.0, ge=0)
    visibility_weight: float = Field(default=5.0, ge=0)
    rng_seed: int = Field(default=0, ge=0)


class TrainConfig(BaseModel):
    """REINFORCE training run configuration (desk-scale defaults)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    batch_size: int = Field(default=64, ge=1)
    n_steps: int = Field(default=10_000, ge=0)
    K: int = Field(default=4, ge=1)
    N: int = Field(default=20, ge=2)
    zeta: float = Field(default=100.0, gt=0)
    area_size: float = Field(default=1000.0, gt=0)
    actor_lr: float = Field(default=1e-4, gt=0)
    critic_lr: float = Field(default=1e-4, gt=0)
    seed: int = Field(default=0, ge=0)
    embed_dim: int = Field(default=64, ge=1)
    eval_every: int = Field(default=500, ge=1)
    eval_size: int = Field(default=30, ge=1)
    grad_clip: float = Field(default=2.0, gt=0)
    checkpoint_path: str = "results/checkpoint.npz"
    log_path: str = "results/train_log.csv"

    @classmethod
    def full_scale(cls, **overrides: Any) -> "TrainConfig":
        """Full-size configuration: D=128, B=256, S=40,000"""
        values = {"embed_dim": 128, "batch_size": 256, "n_steps": 40_000, **overrides}
        return cls(**values)


class AppConfig(BaseModel):
    """Contents of a YAML config file"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    energy: EnergyParams = Field(default_factory=EnergyParams)
    aco: AcoConfig = Field(default_factory=AcoConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)


def _first_error(exc: ValidationError) -> str:
    err = exc.errors()[0]
    location = ".".join(str(part) for part in err.get("loc", ()))
    return f"{location}: {err.get('msg')}" if location else str(err.get("msg"))


def build_energy_params(values: Dict[str, Any]) -> EnergyParams:
    try:
        return EnergyParams(**values)
    except ValidationError as e:
        raise ConfigError(f"Invalid energy parameters: {_first_error(e)}") from e


def _read_yaml(path: str | Path) -> Dict[str, Any]:
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise StorageError(f"Cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Malformed YAML in {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must be a mapping")
    return data


def load_config_file(path: str | Path) -> AppConfig:
    """Load energy/aco/train sections from a YAML file"""
    data = _read_yaml(path)
    try:
        return AppConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {_first_error(e)}") from e


def merge_overrides(base: BaseModel, overrides: Dict[str, Any]) -> Any:
    """Return a copy of a config model with non-None overrides applied"""
    values = {**base.model_dump(), **{k: v for k, v in overrides.items() if v is not None}}
    try:
        return type(base)(**values)
    except ValidationError as e:
        raise ConfigError(f"Invalid {type(base).__name__}: {_first_error(e)}") from e


def save_energy_params(params: EnergyParams, path: str | Path) -> None:
    """Write params as a flat key-value YAML file"""
    try:
        with open(path, "w") as f:
            yaml.safe_dump(params.model_dump(), f, sort_keys=False)
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e}") from e


def load_energy_params(path: str | Path) -> EnergyParams:
    """Read a flat key-value YAML file; missing keys take table defaults"""
    return build_energy_params(_read_yaml(path))


def noise_power_watts(params: EnergyParams) -> float:
    """Total noise power over the bandwidth"""
    return _dbm_to_watts(params.noise_density + 10.0 * math.log10(params.bandwidth))


def overlay_config_file(base: AppConfig, path: str | Path) -> AppConfig:
    """Apply the keys present in a YAML config file on top of `base`"""
    data = _read_yaml(path)
    unknown = set(data) - set(AppConfig.model_fields)
    if unknown:
        raise ConfigError(f"Unknown config sections in {path}: {sorted(unknown)}")
    sections = {}
    for name in AppConfig.model_fields:
        section = data.get(name) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"Section '{name}' in {path} must be a mapping")
        sections[name] = merge_overrides(getattr(base, name), section)
    return AppConfig(**sections)
