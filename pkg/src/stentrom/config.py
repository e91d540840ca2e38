"""Pipeline configuration: one strict TOML or JSON document.

Unknown keys are rejected so typos fail loudly. Every section maps onto the
corresponding dataclass; omitted sections use the documented defaults.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .dataset import ParamSpace
from .errors import ConfigError
from .stent import StentSpec
from .solver import SolverConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class RomSettings:
    eps_pod: float = 0.01
    L_override: int | None = None
    predictor_kind: str = "mu_cl"
    n_cl: int = 3
    criterion: str = "sigma"  # or "energy"
    seed: int = 0

    def __post_init__(self):
        if self.eps_pod < 0:
            raise ConfigError("eps_pod must be >= 0")
        if self.predictor_kind not in ("mu_B", "mu_cl"):
            raise ConfigError("predictor_kind must be 'mu_B' or 'mu_cl'")
        if self.n_cl < 2:
            raise ConfigError("n_cl must be >= 2")
        if self.criterion not in ("sigma", "energy"):
            raise ConfigError("criterion must be 'sigma' or 'energy'")


@dataclass(frozen=True)
class ClassifierSettings:
    seed: int = 0
    threshold: float = 0.5  # decision threshold on probability-like scores


@dataclass(frozen=True)
class CampaignSettings:
    workers: int = 1
    grid_spacing: float = 0.15
    train_fraction: float = 0.75
    split_seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.grid_spacing <= 0:
            raise ConfigError("grid_spacing must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")


@dataclass(frozen=True)
class ServiceSettings:
    host: str = "127.0.0.1"
    port: int = 8000

    def __post_init__(self):
        if not 0 < self.port < 65536:
            raise ConfigError("port must be in (0, 65536)")


@dataclass(frozen=True)
class PipelineConfig:
    dataset_dir: Path = Path("data/campaign")
    model_dir: Path = Path("models")
    report_dir: Path = Path("reports")
    space: ParamSpace = field(default_factory=ParamSpace)
    stent: StentSpec = field(default_factory=StentSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    rom: RomSettings = field(default_factory=RomSettings)
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    campaign: CampaignSettings = field(default_factory=CampaignSettings)
    service: ServiceSettings = field(default_factory=ServiceSettings)


_SECTIONS = {
    "space": ParamSpace,
    "stent": StentSpec,
    "solver": SolverConfig,
    "rom": RomSettings,
    "classifier": ClassifierSettings,
    "campaign": CampaignSettings,
    "service": ServiceSettings,
}

_TUPLE_KEYS = {"y_P1", "z_P1", "D_v", "D_a", "y_ca", "eta"}
_PATH_KEYS = {"dataset_dir", "model_dir", "report_dir"}


def _build_section(name: str, cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"section [{name}] must be a table/object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _TUPLE_KEYS and isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ConfigError(f"[{name}].{key} must be a 2-element range")
            value = (float(value[0]), float(value[1]))
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid [{name}] section: {exc}") from exc


def parse_config(data: dict, base_dir: Path | None = None) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table/object")
    top_known = _PATH_KEYS | set(_SECTIONS)
    unknown = set(data) - top_known
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    kwargs = {}
    for key in _PATH_KEYS:
        if key in data:
            p = Path(data[key])
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            kwargs[key] = p
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build_section(name, cls, data[name])
    return PipelineConfig(**kwargs)


def load_config(path) -> PipelineConfig:
    """Load a TOML (.toml) or JSON (.json) configuration file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_bytes()
    if p.suffix == ".toml":
        try:
            data = tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: invalid TOML: {exc}") from exc
    elif p.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    else:
        raise ConfigError(f"{p}: unsupported config format (use .toml or .json)")
    return parse_config(data, base_dir=p.parent)
