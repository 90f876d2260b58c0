"""Service configuration.

A config file is a flat YAML mapping of the fields below. Model ids follow
one rule: ids starting with ``identity`` name built-in stub models whose
weights are derived deterministically from the id string (so
``identity:panorama-v2`` and ``identity:base`` are different but
reproducible networks); any other id is treated as a path to a saved
``state_dict`` checkpoint. Real fine-tuned checkpoints are deployment
inputs, not produced here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import torch
import yaml

from .errors import ConfigError

# one control module per condition kind a pipeline can ask for
CONTROL_KINDS = ("distance", "softedge", "canny", "tile")


def _default_controls() -> dict[str, str]:
    return {kind: f"identity-control:{kind}" for kind in CONTROL_KINDS}


@dataclass
class BackendConfig:
    base_model: str = "identity:base"
    control_modules: dict[str, str] = field(default_factory=_default_controls)
    steps: int = 20
    guidance_scale: float = 1.0  # 1.0 skips the unconditioned pass entirely
    device: str = "auto"
    circular_padding_fraction: float = 0.6
    # denoise strengths for partial (image-to-image) passes; request
    # directives override per call
    align_strength: float = 0.75
    upscale_strength: float = 0.25
    # stub architecture knobs
    latent_scale: int = 4
    base_channels: int = 32
    # tiled upscaling geometry, in output pixels
    tile_size: int = 512
    tile_overlap: int = 64
    # requests allowed to wait behind the one being processed
    queue_depth: int = 4

    def validate(self) -> "BackendConfig":
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if not 0.0 <= self.circular_padding_fraction <= 1.0:
            raise ConfigError(
                f"circular_padding_fraction must be in [0, 1], got {self.circular_padding_fraction}"
            )
        for name in ("align_strength", "upscale_strength"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1], got {value}")
        if self.guidance_scale <= 0.0:
            raise ConfigError(f"guidance_scale must be positive, got {self.guidance_scale}")
        if self.latent_scale < 1:
            raise ConfigError(f"latent_scale must be >= 1, got {self.latent_scale}")
        if self.base_channels < 8 or self.base_channels % 8:
            raise ConfigError(f"base_channels must be a positive multiple of 8, got {self.base_channels}")
        if self.tile_size < 2 * self.tile_overlap or self.tile_overlap < 1:
            raise ConfigError(
                f"need tile_size >= 2*tile_overlap >= 2, got {self.tile_size}/{self.tile_overlap}"
            )
        if self.queue_depth < 0:
            raise ConfigError(f"queue_depth must be >= 0, got {self.queue_depth}")
        if not isinstance(self.control_modules, dict):
            raise ConfigError("control_modules must be a mapping of condition kind to model id")
        if set(self.control_modules) != set(CONTROL_KINDS):
            unknown = sorted(set(self.control_modules) - set(CONTROL_KINDS))
            missing = sorted(set(CONTROL_KINDS) - set(self.control_modules))
            raise ConfigError(
                f"control_modules must cover exactly {list(CONTROL_KINDS)}; "
                f"missing {missing}, unknown {unknown}"
            )
        if self.device != "auto":
            try:
                torch.device(self.device)
            except RuntimeError as e:
                raise ConfigError(f"bad device {self.device!r}: {e}") from e
        return self

    def resolve_device(self) -> torch.device:
        if self.device == "auto":
            return torch.device("cuda" if torch.cuda.is_available() else "cpu")
        return torch.device(self.device)


def config_from_dict(data: dict) -> BackendConfig:
    known = {f.name: f.type for f in fields(BackendConfig)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        want = BackendConfig.__dataclass_fields__[name].type
        if want == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        elif want == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be a number, got {value!r}")
            value = float(value)
        elif want == "str":
            if not isinstance(value, str):
                raise ConfigError(f"{name} must be a string, got {value!r}")
        kwargs[name] = value
    if "control_modules" in kwargs:
        merged = _default_controls()
        overrides = kwargs["control_modules"]
        if not isinstance(overrides, dict):
            raise ConfigError("control_modules must be a mapping of condition kind to model id")
        merged.update({str(k): str(v) for k, v in overrides.items()})
        kwargs["control_modules"] = merged
    return BackendConfig(**kwargs).validate()


def load_config(path) -> BackendConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config {p} is not valid YAML: {e}") from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {p} must be a mapping, got {type(data).__name__}")
    return config_from_dict(data)
