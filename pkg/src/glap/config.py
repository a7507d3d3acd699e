"""Run configuration: defaults, key=value files, JSON manifests."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from . import global_opt, mesh, segmentation

PROJECTIONS = ("glap", "gap", "pannini", "gpp", "rectilinear", "stereographic")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RenderConfig:
    eri: str = ""
    labels: str = ""
    out: str = "glap_out"
    projection: str = "glap"
    vd_phi_deg: float = 0.0
    vd_theta_deg: float = 0.0
    fov_deg: float = 150.0
    width: int = 1816
    height: int = 1020
    # fixed-parameter projections
    d: float = 0.5
    vc: float = 0.0
    # global search
    beta: float = global_opt.BETA
    measure_scale: float = global_opt.MEASURE_SCALE
    normalize: str = "absolute"
    # mesh optimisation
    mesh_divisor: int = mesh.MESH_DIVISOR
    d_f_offset: float = mesh.D_F_OFFSET
    vc_f: float = mesh.VC_F
    lambda_c: float = 0.3
    lambda_b: float = 1.5
    lambda_s: float = 0.5
    lambda_a: float = 3.0
    iters: int = mesh.ITERS
    lr: float = mesh.LEARNING_RATE
    lr_units: str = "plane"
    smoothness: str = "relative"
    boundary: str = "vertex"
    boundary_side: str = "source"
    min_object_fraction: float = segmentation.MIN_OBJECT_FRACTION
    flow_threshold: float = 0.25
    flow_mask: bool = True

    def validate(self) -> "RenderConfig":
        if self.projection not in PROJECTIONS:
            raise ConfigError(f"projection must be one of {', '.join(PROJECTIONS)}, got {self.projection!r}")
        if not 0 < self.fov_deg < 360:
            raise ConfigError(f"fov_deg must be in (0, 360), got {self.fov_deg}")
        if self.width < 2 or self.height < 2:
            raise ConfigError("width and height must be >= 2")
        if self.mesh_divisor < 1:
            raise ConfigError("mesh_divisor must be >= 1")
        if self.beta <= 0:
            raise ConfigError("beta must be > 0")
        if self.iters < 1 or self.lr <= 0:
            raise ConfigError("iters must be >= 1 and lr > 0")
        if not 0 < self.measure_scale <= 1:
            raise ConfigError("measure_scale must be in (0, 1]")
        if self.normalize not in ("absolute", "minmax"):
            raise ConfigError("normalize must be absolute or minmax")
        if self.lr_units not in mesh.LR_UNITS:
            raise ConfigError("lr_units must be plane or grid")
        if self.smoothness not in ("printed", "relative"):
            raise ConfigError("smoothness must be printed or relative")
        if self.boundary not in ("vertex", "domain"):
            raise ConfigError("boundary must be vertex or domain")
        if self.boundary_side not in mesh.BOUNDARY_SIDES:
            raise ConfigError("boundary_side must be source or printed")
        if min(self.lambda_c, self.lambda_b, self.lambda_s, self.lambda_a) < 0:
            raise ConfigError("energy weights must be >= 0")
        return self


FIELD_TYPES = {f.name: f.type for f in fields(RenderConfig)}


def _coerce(key: str, value):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = FIELD_TYPES[key]
    if not isinstance(value, str):
        value = value if kind != "float" else float(value)
        return value
    raw = value.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_kv(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def load_config_file(path) -> dict:
    """Read a key=value file or the ``config`` block of a JSON manifest."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        data = data.get("config", data)
        return {k: _coerce(k, v) for k, v in data.items()}
    return parse_kv(text, str(path))


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RenderConfig:
    """Defaults < file < command line."""
    cfg = RenderConfig()
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for k, v in merged.items():
        merged[k] = _coerce(k, v)
    return replace(cfg, **merged).validate()


def config_dict(cfg: RenderConfig) -> dict:
    return asdict(cfg)
