"""Run configuration: line-oriented ``key = value`` files with dotted keys.

Example::

    # model widths
    model.c = 32
    schedule.t = 5
    train.seed = 7

Blank lines and lines starting with ``#`` are ignored. Values are coerced to
the declared field type (int, float, bool, str); booleans are ``true`` /
``false``. Unknown keys are an error so typos fail fast. The canonical text
form (sorted keys) is what gets hashed into checkpoints.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class ModelConfig:
    c: int = 32                 # stage-1 feature width
    c_prime: int = 48           # stage-2 encoder width
    k_blocks: int = 2           # temporal mixer depth
    six_channel_inputs: bool = False  # append linearized channels to LDR inputs


@dataclass
class ScheduleConfig:
    mode: str = "fixed_reference"
    t: int = 5
    anchors_per_window: int = 1
    anchor_timestamp: int = 3
    anchor_timestamp_b: int = 1
    stops: float = 2.0


@dataclass
class NoiseConfig:
    sigma_low: float = 0.03
    sigma_mid: float = 0.01
    sigma_high: float = 0.005

    def as_tuple(self) -> tuple:
        return (self.sigma_low, self.sigma_mid, self.sigma_high)


@dataclass
class CameraConfig:
    gamma: float = 2.2


@dataclass
class LossConfig:
    lambda_t: float = 0.5
    lambda_z: float = 0.1
    kappa: float = 5000.0


@dataclass
class DataConfig:
    manifest: str = ""
    crop: int = 64
    num_windows: int = 4        # gen-data: how many procedural windows
    frames_per_window: int = 7
    height: int = 96
    width: int = 96
    format: str = "raw"         # gen-data frame format: raw | hdr
    motion: float = 2.0         # gen-data patch speed, pixels per frame


@dataclass
class TrainConfig:
    lr_initial: float = 1e-4
    lr_final: float = 1e-6
    batch_size: int = 2
    max_steps: int = 200
    seed: int | None = None     # mandatory before any run starts
    checkpoint_every: int = 100
    log_every: int = 10
    sequential: bool = True     # pin torch to one thread for bit-reproducibility


@dataclass
class PathsConfig:
    checkpoint_dir: str = "checkpoints"
    report_dir: str = "reports"


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)


def _sections(config: RunConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in dataclasses.fields(config)}


def _coerce(raw: str, kind, key: str):
    raw = raw.strip()
    if kind is bool or kind == "bool | None":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{key}: expected true/false, got {raw!r}")
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError as exc:
        raise ValueError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from exc
    return raw


def _field_kind(section, name: str):
    for f in dataclasses.fields(section):
        if f.name == name:
            if f.type in ("int", int):
                return int
            if f.type in ("float", float):
                return float
            if f.type in ("bool", bool):
                return bool
            if f.type in ("int | None",):
                return int
            return str
    return None


def parse_config_text(text: str) -> dict:
    """Parse key = value lines to a flat {dotted key: raw string} mapping."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def apply_values(config: RunConfig, values: dict) -> RunConfig:
    sections = _sections(config)
    for key, raw in values.items():
        if "." not in key:
            raise ValueError(f"config key {key!r} must be dotted, e.g. model.c")
        section_name, _, field_name = key.partition(".")
        section = sections.get(section_name)
        if section is None:
            raise ValueError(f"unknown config section {section_name!r} in key {key!r}")
        kind = _field_kind(section, field_name)
        if kind is None:
            raise ValueError(f"unknown config key {key!r}")
        setattr(section, field_name, _coerce(raw, kind, key))
    return config


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    return apply_values(RunConfig(), parse_config_text(text))


def config_to_text(config: RunConfig) -> str:
    """Canonical serialized form: sorted dotted keys, one per line."""
    lines = []
    for section_name, section in sorted(_sections(config).items()):
        for f in dataclasses.fields(section):
            value = getattr(section, f.name)
            if value is None:
                continue
            if isinstance(value, bool):
                rendered = "true" if value else "false"
            elif isinstance(value, float):
                rendered = repr(value)
            else:
                rendered = str(value)
            lines.append(f"{section_name}.{f.name} = {rendered}")
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(config_to_text(config).encode("utf-8")).hexdigest()


def require_seed(config: RunConfig) -> int:
    if config.train.seed is None:
        raise ValueError("train.seed must be set (in the config file or via --seed)")
    return int(config.train.seed)
