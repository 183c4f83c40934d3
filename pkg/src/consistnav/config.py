"""Run configuration: one JSON document bundling every tunable group, with
the fixed executive thresholds as shipped defaults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

from .control import GuardConfig
from .executive import FseConfig
from .memory import MemoryConfig
from .sim.dynamics import EpisodeConfig
from .sim.sensing import DetectorConfig


class ConfigError(Exception):
    """Raised for unknown keys or malformed config documents."""


_SECTIONS = {
    "memory": MemoryConfig,
    "fse": FseConfig,
    "guard": GuardConfig,
    "detector": DetectorConfig,
    "episode": EpisodeConfig,
}


@dataclass
class RunConfig:
    memory: MemoryConfig
    fse: FseConfig
    guard: GuardConfig
    detector: DetectorConfig
    episode: EpisodeConfig

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls(MemoryConfig(), FseConfig(), GuardConfig(),
                   DetectorConfig(), EpisodeConfig())

    def to_dict(self) -> dict[str, Any]:
        return {name: asdict(getattr(self, name)) for name in _SECTIONS}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        """Build from a (possibly partial) document; unknown sections or
        keys are schema errors."""
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        built = {}
        for name, klass in _SECTIONS.items():
            section = data.get(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"section '{name}' must be an object")
            allowed = {f.name for f in fields(klass)}
            bad = set(section) - allowed
            if bad:
                raise ConfigError(f"section '{name}': unknown keys {sorted(bad)}")
            try:
                built[name] = klass(**section)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"section '{name}': {e}") from e
        return cls(**built)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
        return cls.from_dict(data)
