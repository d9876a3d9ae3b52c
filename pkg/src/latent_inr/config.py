"""Single-document JSON run configuration with strict key checking."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .model import ConfigError, ModelConfig
from .training import TrainConfig

CONFIG_VERSION = 1


@dataclass
class CodecConfig:
    bits: int = 8
    quantize_hash_tables: bool = True


@dataclass
class TaskConfig:
    recall_ks: list = field(default_factory=lambda: [1, 5, 10])


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    codec: CodecConfig = field(default_factory=CodecConfig)
    tasks: TaskConfig = field(default_factory=TaskConfig)
    version: int = CONFIG_VERSION

    def to_dict(self) -> dict:
        return asdict(self)


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return cls(**raw)


def parse_run_config(raw: dict) -> RunConfig:
    """Build a RunConfig; ``"preset"`` selects ``main``/``appendix`` model defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"version", "preset", "model", "train", "codec", "tasks"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    if "version" not in raw:
        raise ConfigError("config is missing its 'version' field")
    if raw["version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {raw['version']!r}")
    base = ModelConfig.preset(raw.get("preset", "main"))
    model_raw = raw.get("model") or {}
    if not isinstance(model_raw, dict):
        raise ConfigError("section 'model' must be an object")
    model = ModelConfig.from_dict({**asdict(base), **model_raw})
    train = _section(TrainConfig, raw.get("train"), "train")
    codec = _section(CodecConfig, raw.get("codec"), "codec")
    tasks = _section(TaskConfig, raw.get("tasks"), "tasks")
    train.validate()
    if not 4 <= codec.bits <= 16:
        raise ConfigError("codec bits must lie in [4, 16]")
    return RunConfig(model, train, codec, tasks, raw["version"])


def load_run_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        return parse_run_config(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
