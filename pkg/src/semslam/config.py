"""Pipeline configuration and the ``key = value`` config file format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .errors import BadConfig
from .geometry import CameraIntrinsics
from .ground_plane import RansacConfig

# mean keyframe segmentation time (ms) per downsampling factor, GPU network
SEGMENTATION_MS_BY_FACTOR = {
    Fraction(1): 479.05,
    Fraction(4, 3): 288.44,
    Fraction(2): 129.44,
    Fraction(4): 61.66,
}


@dataclass(frozen=True)
class PipelineConfig:
    h_real: float = 1.7
    parallax_distance: float = 250.0
    connectivity_min: int = 15
    bootstrap_min_points: int = 50
    scale_lower: float = 0.001
    scale_upper: float = 0.2
    downsample_factor: Fraction = Fraction(2)
    features_per_frame: int = 3000
    gap_frames: int = 10
    tracked_ratio: float = 0.7

    # lane cost model, ms
    cost_localization_ms: float = 27.87
    cost_triangulation_ms: float = 130.10
    cost_scale_correction_ms: float = 14.99
    cost_segmentation_ms: Optional[float] = None  # None: look up by downsample_factor
    cost_feature_refinement_ms: float = 70.31

    ransac_iterations: int = 200
    ransac_inlier_threshold: float = 0.05
    ransac_min_inliers: int = 20
    seed: int = 0

    focal_length: float = 718.0
    principal_x: float = 320.0
    principal_y: float = 240.0
    width: int = 640
    height: int = 480

    scale_correction: bool = True
    feature_refinement: bool = True
    plane_support: str = "current"  # "current" | "connected"
    tracker: str = "replay"  # "replay" | "ssd"

    def __post_init__(self):
        object.__setattr__(self, "downsample_factor", Fraction(self.downsample_factor))
        positive = ["h_real", "parallax_distance", "connectivity_min", "bootstrap_min_points",
                    "scale_lower", "scale_upper", "downsample_factor", "features_per_frame",
                    "gap_frames", "tracked_ratio", "focal_length", "principal_x", "principal_y",
                    "width", "height", "ransac_iterations", "ransac_inlier_threshold"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise BadConfig(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.scale_lower < self.scale_upper:
            raise BadConfig("scale bounds must satisfy scale_lower < scale_upper")
        if self.plane_support not in ("current", "connected"):
            raise BadConfig(f"plane_support must be 'current' or 'connected', got {self.plane_support!r}")
        if self.tracker not in ("replay", "ssd"):
            raise BadConfig(f"tracker must be 'replay' or 'ssd', got {self.tracker!r}")
        if self.cost_segmentation_ms is None and self.downsample_factor not in SEGMENTATION_MS_BY_FACTOR:
            raise BadConfig(f"no segmentation cost for factor {self.downsample_factor}; "
                            "set cost_segmentation_ms")
        for name in ("cost_localization_ms", "cost_triangulation_ms", "cost_scale_correction_ms",
                     "cost_feature_refinement_ms"):
            if getattr(self, name) < 0:
                raise BadConfig(f"{name} must be >= 0")

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.focal_length, self.principal_x, self.principal_y)

    @property
    def ransac(self) -> RansacConfig:
        return RansacConfig(self.ransac_iterations, self.ransac_inlier_threshold,
                            self.ransac_min_inliers, self.seed)

    @property
    def segmentation_ms(self) -> float:
        if self.cost_segmentation_ms is not None:
            return self.cost_segmentation_ms
        return SEGMENTATION_MS_BY_FACTOR[self.downsample_factor]

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: dict, strict: bool = True) -> "PipelineConfig":
        return cls(**coerce_fields(cls, values, strict))

    def to_ini(self) -> str:
        return dump_ini({f.name: getattr(self, f.name) for f in fields(self)})


def _coerce(name, typ, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    typ = str(typ)
    try:
        if text.lower() == "none" and "Optional" in typ:
            return None
        if "bool" in typ:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if "Fraction" in typ:
            return Fraction(text)
        if "int" in typ and "Optional" not in typ:
            return int(text)
        if "float" in typ:
            return float(text)
        return text
    except (ValueError, ZeroDivisionError) as exc:
        raise BadConfig(f"bad value for {name}: {raw!r}") from exc


def coerce_fields(cls, values: dict, strict: bool = True) -> dict:
    known = {f.name: f.type for f in fields(cls)}
    unknown = set(values) - set(known)
    if strict and unknown:
        raise BadConfig(f"unknown config keys: {sorted(unknown)}")
    return {k: _coerce(k, known[k], v) for k, v in values.items() if k in known}


def load_ini(path) -> dict:
    """Parse ``key = value`` lines; ``#``/``;`` comments and ``[section]`` lines are ignored."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise BadConfig(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].split(";", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise BadConfig(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def dump_ini(values: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())
