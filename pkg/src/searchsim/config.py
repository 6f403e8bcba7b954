"""Run configuration: every tunable in one validated, hashable tree.

Configs load from JSON (section -> {key: value}); unknown sections or keys
are rejected so a typo cannot silently fall back to a default. The config
hash embedded in every output file is the SHA-256 of the canonical JSON form.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .encoding import EncoderConfig
from .nn.train import TrainConfig
from .phd import BirthConfig
from .sensing import SensorConfig
from .vehicle import ControllerConfig
from .world import Environment, GridSpec


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class PhdSettings:
    survival_prob: float = 0.99
    birth_mass: float = 0.2
    birth_particles: int = 250
    particle_cap: int = 5000
    k_max: int = 30
    kmeans_restarts: int = 5
    kmeans_max_iter: int = 50
    kmeans_tol: float = 1e-6
    mass_threshold: float = 0.8
    spread_threshold: float = 5.0
    gate_radius: float = 15.0
    # cleanup of a promoted cluster: particles within this radius are removed
    # (the gate radius, since gating blocks re-detection inside it anyway)
    deletion_radius: float = 15.0
    delete_promoted_particles: bool = True
    # a promotable cluster closer than gate_radius to an existing confirmed
    # target is treated as residue of that target, not a new find
    dedup_promotions: bool = True
    match_radius: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.survival_prob <= 1.0):
            raise ConfigError("survival_prob must be in (0, 1]")
        if self.birth_mass < 0 or self.birth_particles < 0:
            raise ConfigError("birth settings must be nonnegative")
        for name in ("particle_cap", "k_max", "kmeans_restarts", "kmeans_max_iter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("mass_threshold", "spread_threshold", "gate_radius",
                     "deletion_radius", "match_radius", "kmeans_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def birth(self) -> BirthConfig:
        return BirthConfig(self.birth_mass, self.birth_particles)


@dataclass(frozen=True)
class AsSettings:
    n_dirs: int = 8
    step_radius: float = 9.0
    smoothing_alpha: float = 0.7  # applied only by the cloned policy

    def __post_init__(self):
        if self.step_radius <= 0:
            raise ConfigError("step_radius must be positive")
        if not (0.0 <= self.smoothing_alpha < 1.0):
            raise ConfigError("smoothing_alpha must be in [0, 1)")


@dataclass(frozen=True)
class AsiSettings:
    spacing: float = 80.0
    origin_x: float = 10.0
    origin_y: float = 10.0
    beta: float = 100.0
    measurement_interval: int = 10  # control steps between measurements

    def __post_init__(self):
        if self.spacing <= 0:
            raise ConfigError("spacing must be positive")
        if self.measurement_interval < 1:
            raise ConfigError("measurement_interval must be >= 1")

    @property
    def origin(self) -> tuple[float, float]:
        return (self.origin_x, self.origin_y)


@dataclass(frozen=True)
class ExperimentSettings:
    as_steps: int = 250
    asi_decisions: int = 50
    n_trials: int = 10
    jobs: int = 1

    def __post_init__(self):
        if self.as_steps < 1 or self.asi_decisions < 1 or self.n_trials < 1:
            raise ConfigError("episode and trial counts must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


_SECTIONS = {
    "env": Environment,
    "grid": GridSpec,
    "sensor": SensorConfig,
    "phd": PhdSettings,
    "as_planner": AsSettings,
    "asi_planner": AsiSettings,
    "controller": ControllerConfig,
    "encoding": EncoderConfig,
    "training": TrainConfig,
    "experiment": ExperimentSettings,
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    env: Environment = field(default_factory=Environment)
    grid: GridSpec = field(default_factory=GridSpec)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    phd: PhdSettings = field(default_factory=PhdSettings)
    as_planner: AsSettings = field(default_factory=AsSettings)
    asi_planner: AsiSettings = field(default_factory=AsiSettings)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    encoding: EncoderConfig = field(default_factory=EncoderConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)

    def __post_init__(self):
        self.grid.check_matches(self.env)

    def replace(self, **section_updates) -> "RunConfig":
        """New config with whole sections or the seed replaced."""
        return dataclasses.replace(self, **section_updates)

    def replace_in(self, section: str, **updates) -> "RunConfig":
        """New config with fields inside one section replaced."""
        current = getattr(self, section)
        return dataclasses.replace(self, **{section: dataclasses.replace(current, **updates)})

    def to_dict(self) -> dict:
        doc: dict = {"seed": self.seed}
        for name in _SECTIONS:
            doc[name] = dataclasses.asdict(getattr(self, name))
        return doc

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config root must be an object")
        unknown = set(doc) - set(_SECTIONS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kwargs: dict = {}
        if "seed" in doc:
            if not isinstance(doc["seed"], int):
                raise ConfigError("seed must be an integer")
            kwargs["seed"] = doc["seed"]
        for name, section_cls in _SECTIONS.items():
            if name not in doc:
                continue
            section_doc = dict(doc[name])
            if name == "sensor":
                section_doc = _translate_sensor_variances(section_doc)
            allowed = {f.name for f in fields(section_cls)}
            unknown = set(section_doc) - allowed
            if unknown:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
            try:
                kwargs[name] = section_cls(**section_doc)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid [{name}] section: {exc}") from exc
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _translate_sensor_variances(doc: dict) -> dict:
    """Accept noise as variances (var_range/var_bearing) or standard deviations."""
    out = dict(doc)
    if "var_range" in out:
        if "sigma_range" in out:
            raise ConfigError("give either var_range or sigma_range, not both")
        out["sigma_range"] = math.sqrt(float(out.pop("var_range")))
    if "var_bearing" in out:
        if "sigma_bearing" in out:
            raise ConfigError("give either var_bearing or sigma_bearing, not both")
        out["sigma_bearing"] = math.sqrt(float(out.pop("var_bearing")))
    return out
