"""Pipeline configuration: YAML in, validated dataclasses out.

Unknown keys are errors (typos should fail loudly, not silently fall back to
defaults), and every numeric field is range-checked. Section dataclasses for
masks, seams, and the imitator are the same parameter objects the modules
take, so the config is the single source of defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .imitator import ImitatorParams
from .masks import DepthEdgeParams, InpaintMaskParams
from .seamfix import SeamFixParams


@dataclass
class SceneConfig:
    mesh: str = ""
    texture: str | None = None


@dataclass
class OutputConfig:
    directory: str = "runs/out"
    atlas_dilation: int = 4
    window_rects: list = field(default_factory=list)  # [u0, v0, u1, v1] per rect


@dataclass
class ViewpointConfig:
    central: object = "auto"  # "auto" or [x, y, z]
    candidates: list = field(default_factory=list)  # optional [x, y, z] list
    inpaint_count: int = 2
    eye_height: float = 1.6


@dataclass
class PanoramaConfig:
    coarse_width: int = 1024
    upscale_factor: int = 3

    @property
    def coarse_height(self) -> int:
        return self.coarse_width // 2

    @property
    def large_width(self) -> int:
        return self.coarse_width * self.upscale_factor

    @property
    def large_height(self) -> int:
        return self.coarse_height * self.upscale_factor


@dataclass
class StylizerConfig:
    backend: str = "mock"
    url: str | None = None
    command: list = field(default_factory=list)
    seed: int = 7
    retries: int = 3
    backoff: float = 0.5
    denoise_strength: float = 0.75
    circular_padding_fraction: float = 0.6


@dataclass
class MaskConfig:
    visibility_epsilon: float = 0.01
    safe_min_grazing_deg: float = 10.0
    safe_max_distance: float = 2.5
    edges: DepthEdgeParams = field(default_factory=DepthEdgeParams)
    inpaint: InpaintMaskParams = field(default_factory=InpaintMaskParams)


@dataclass
class BlendConfig:
    tol: float = 1e-4
    max_iters: int = 10000
    level_iters: int = 200


@dataclass
class SeamConfig(SeamFixParams):
    align_seam_fix: bool = False  # the aligned image keeps its seams by default


@dataclass
class PipelineConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    viewpoints: ViewpointConfig = field(default_factory=ViewpointConfig)
    panorama: PanoramaConfig = field(default_factory=PanoramaConfig)
    stylizer: StylizerConfig = field(default_factory=StylizerConfig)
    masks: MaskConfig = field(default_factory=MaskConfig)
    blend: BlendConfig = field(default_factory=BlendConfig)
    seams: SeamConfig = field(default_factory=SeamConfig)
    imitator: ImitatorParams = field(default_factory=ImitatorParams)


def _coerce(value, target_type, where: str):
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if target_type is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if target_type is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    return value


# only fields declared with exactly one of these types get coerced; union
# and object fields (viewpoints.central is "auto" | [x, y, z]) are validated
# later by validate_config instead. Annotations may be strings or types
# depending on the defining module.
_SCALAR_ANNOTATIONS = {"int": int, "float": float, "bool": bool, "str": str,
                       int: int, float: float, bool: bool, str: str}


def _fill_dataclass(instance, data: dict, where: str):
    known = {f.name: f for f in dataclasses.fields(instance)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(
                f"{where}: unknown key {key!r} (known: {', '.join(sorted(known))})"
            )
        current = getattr(instance, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            _fill_dataclass(current, value, f"{where}.{key}")
            continue
        ftype = _SCALAR_ANNOTATIONS.get(known[key].type)
        if ftype is not None:
            value = _coerce(value, ftype, f"{where}.{key}")
        setattr(instance, key, value)
    return instance


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    _require(bool(cfg.scene.mesh), "scene.mesh: a mesh path is required")
    _require(cfg.panorama.coarse_width >= 16, "panorama.coarse_width: must be >= 16")
    _require(
        cfg.panorama.coarse_width % 2 == 0,
        "panorama.coarse_width: must be even (2:1 panoramas)",
    )
    _require(cfg.panorama.upscale_factor >= 1, "panorama.upscale_factor: must be >= 1")
    _require(
        cfg.stylizer.backend in ("mock", "http", "subprocess"),
        f"stylizer.backend: unknown backend {cfg.stylizer.backend!r}",
    )
    if cfg.stylizer.backend == "http":
        _require(bool(cfg.stylizer.url), "stylizer.url: required for the http backend")
    if cfg.stylizer.backend == "subprocess":
        _require(bool(cfg.stylizer.command), "stylizer.command: required for the subprocess backend")
    _require(cfg.stylizer.retries >= 1, "stylizer.retries: must be >= 1")
    _require(
        0.0 <= cfg.stylizer.circular_padding_fraction <= 1.0,
        "stylizer.circular_padding_fraction: must be in [0, 1]",
    )
    _require(cfg.masks.visibility_epsilon > 0.0, "masks.visibility_epsilon: must be > 0")
    _require(
        0.0 < cfg.masks.safe_min_grazing_deg < 90.0,
        "masks.safe_min_grazing_deg: must be in (0, 90)",
    )
    _require(cfg.masks.safe_max_distance > 0.0, "masks.safe_max_distance: must be > 0")
    _require(cfg.blend.tol > 0.0, "blend.tol: must be > 0")
    _require(cfg.blend.max_iters >= 1, "blend.max_iters: must be >= 1")
    _require(
        0.0 < cfg.seams.strip_fraction < 1.0, "seams.strip_fraction: must be in (0, 1)"
    )
    _require(
        cfg.seams.order in ("horizontal-first", "poles-first"),
        f"seams.order: unknown order {cfg.seams.order!r}",
    )
    _require(
        0.0 < cfg.seams.pole_fov_deg < 180.0, "seams.pole_fov_deg: must be in (0, 180)"
    )
    _require(cfg.viewpoints.inpaint_count >= 0, "viewpoints.inpaint_count: must be >= 0")
    central = cfg.viewpoints.central
    _require(
        central == "auto"
        or (isinstance(central, (list, tuple)) and len(central) == 3),
        "viewpoints.central: 'auto' or [x, y, z]",
    )
    for i, cand in enumerate(cfg.viewpoints.candidates):
        _require(
            isinstance(cand, (list, tuple)) and len(cand) == 3,
            f"viewpoints.candidates[{i}]: expected [x, y, z]",
        )
    for i, rect in enumerate(cfg.output.window_rects):
        _require(
            isinstance(rect, (list, tuple)) and len(rect) == 4,
            f"output.window_rects[{i}]: expected [u0, v0, u1, v1]",
        )
    _require(cfg.output.atlas_dilation >= 0, "output.atlas_dilation: must be >= 0")
    _require(cfg.imitator.iterations >= 1, "imitator.iterations: must be >= 1")
    _require(cfg.imitator.num_freqs >= 1, "imitator.num_freqs: must be >= 1")
    _require(
        0.0 <= cfg.imitator.holdout_fraction < 1.0,
        "imitator.holdout_fraction: must be in [0, 1)",
    )
    return cfg


def config_from_dict(data: dict, where: str = "config") -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: top level must be a mapping")
    cfg = PipelineConfig()
    _fill_dataclass(cfg, data, where)
    return validate_config(cfg)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path} is not valid YAML: {e}") from e
    cfg = config_from_dict(data, where=str(path))
    # mesh paths are resolved relative to the config file's directory
    base = path.parent
    mesh = Path(cfg.scene.mesh)
    if not mesh.is_absolute():
        cfg.scene.mesh = str(base / mesh)
    if cfg.scene.texture:
        tex = Path(cfg.scene.texture)
        if not tex.is_absolute():
            cfg.scene.texture = str(base / tex)
    return cfg


def config_to_dict(cfg: PipelineConfig) -> dict:
    return dataclasses.asdict(cfg)


def save_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=False)
