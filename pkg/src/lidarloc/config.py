"""Flat key-value run configuration with CLI-flag overrides.

Config files are plain text: one `key = value` per line, `#` comments. The
stage-schedule schema:

    stages = 3                      # number of stages
    stage.1.max_translation_m = 2.0
    stage.1.max_rotation_deg = 10.0
    stage.1.regressor = default     # optional, defaults to "default"

Validation errors always name the offending key so CLI failures are
actionable from the one-line message.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .occlusion import OcclusionParams
from .pointmap import CropSpec
from .refine import StageSpec, default_stage_schedule
from .se3 import NoiseSpec

DATASET_ENV_VAR = "LIDARLOC_DATASET"


class ConfigError(ValueError):
    """Invalid configuration; `key` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _get_float(mapping: dict, key: str, default: float | None = None) -> float:
    if key not in mapping:
        if default is None:
            raise ConfigError(key, "missing required value")
        return default
    try:
        return float(mapping[key])
    except ValueError:
        raise ConfigError(key, f"not a number: {mapping[key]!r}") from None


def _get_int(mapping: dict, key: str, default: int | None = None) -> int:
    if key not in mapping:
        if default is None:
            raise ConfigError(key, "missing required value")
        return default
    try:
        return int(mapping[key])
    except ValueError:
        raise ConfigError(key, f"not an integer: {mapping[key]!r}") from None


def parse_stage_schedule(mapping: dict[str, str], default_regressor: str = "default") -> list[StageSpec]:
    """Stage list from `stages` + `stage.N.*` keys; published defaults if absent."""
    if "stages" not in mapping:
        return default_stage_schedule(default_regressor)
    count = _get_int(mapping, "stages")
    if count < 1:
        raise ConfigError("stages", f"must be >= 1, got {count}")
    schedule = []
    for n in range(1, count + 1):
        t_key = f"stage.{n}.max_translation_m"
        r_key = f"stage.{n}.max_rotation_deg"
        schedule.append(
            StageSpec(
                mapping.get(f"stage.{n}.regressor", default_regressor),
                _get_float(mapping, t_key),
                math.radians(_get_float(mapping, r_key)),
            )
        )
    return schedule


@dataclass
class RunConfig:
    """Everything a CLI run needs; see field names for the config keys."""

    dataset: str | None = None
    sequence: str = "00"
    synthetic: bool = False
    frames: int = 10
    map_resolution: float = 0.1
    crop: CropSpec = field(default_factory=CropSpec)
    occlusion: OcclusionParams | None = field(default_factory=OcclusionParams)
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(2.0, math.radians(10.0)))
    stages: list[StageSpec] = field(default_factory=default_stage_schedule)
    regressor: str = "identity"
    seed: int = 0
    jobs: int = 1
    z_near: float = 0.05
    out: str = "out"
    timestamp: bool = True

    @staticmethod
    def from_mapping(mapping: dict[str, str]) -> "RunConfig":
        cfg = RunConfig()
        if "dataset" in mapping:
            cfg.dataset = mapping["dataset"]
        cfg.sequence = mapping.get("sequence", cfg.sequence)
        cfg.synthetic = mapping.get("synthetic", "false").lower() in ("1", "true", "yes")
        cfg.frames = _get_int(mapping, "frames", cfg.frames)
        cfg.map_resolution = _get_float(mapping, "map_resolution", cfg.map_resolution)
        cfg.crop = CropSpec(
            _get_float(mapping, "crop_forward", cfg.crop.forward),
            _get_float(mapping, "crop_lateral", cfg.crop.lateral),
            _get_float(mapping, "crop_vertical", cfg.crop.vertical),
        )
        window = _get_int(mapping, "occlusion_window", 5)
        threshold = _get_float(mapping, "occlusion_th", 3.0)
        if mapping.get("occlusion", "on") in ("off", "none", "false"):
            cfg.occlusion = None
        else:
            cfg.occlusion = OcclusionParams.from_threshold(window, threshold)
        cfg.noise = NoiseSpec(
            _get_float(mapping, "noise_t", cfg.noise.max_translation),
            math.radians(_get_float(mapping, "noise_r_deg", math.degrees(cfg.noise.max_rotation))),
        )
        cfg.stages = parse_stage_schedule(mapping)
        cfg.regressor = mapping.get("regressor", cfg.regressor)
        cfg.seed = _get_int(mapping, "seed", cfg.seed)
        cfg.jobs = _get_int(mapping, "jobs", cfg.jobs)
        cfg.z_near = _get_float(mapping, "z_near", cfg.z_near)
        cfg.out = mapping.get("out", cfg.out)
        return cfg

    def resolve_dataset(self) -> str:
        root = self.dataset or os.environ.get(DATASET_ENV_VAR)
        if not root:
            raise ConfigError("dataset", f"no dataset root (flag --dataset or ${DATASET_ENV_VAR})")
        if not Path(root).is_dir():
            raise ConfigError("dataset", f"path does not exist: {root}")
        return root
