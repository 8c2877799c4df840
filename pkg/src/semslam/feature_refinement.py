"""Corner-feature refinement: drop movable-object and low-parallax features.

Low-parallax background features are those whose displacement between the
previous and the current keyframe stays below an adaptive pixel threshold.
The threshold is the image distance travelled by a point ``d`` meters ahead
that sits, in the current keyframe, halfway between the image origin and the
principal point, when the camera moves ``l`` meters along its optical axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Protocol

import numpy as np

from .errors import MalformedLine, OutOfBounds, OutOfFrame, RasterSizeMismatch
from .geometry import CameraIntrinsics, Pose, back_project, project
from .mapstate import Feature, FeatureStatus
from .semantic_labels import LabelClass, LabelRaster, sample_labels

PARALLAX_DISTANCE = 250.0


@dataclass(frozen=True)
class ParallaxParams:
    distance_m: float = PARALLAX_DISTANCE
    baseline_z: float = 0.0

    def __post_init__(self):
        if not self.distance_m > 0 or self.baseline_z < 0:
            raise ValueError(f"invalid parallax parameters {self}")


def _label_features(features, raster: LabelRaster):
    if not features:
        return []
    uv = np.array([f.position for f in features], dtype=float)
    try:
        labels = sample_labels(raster, uv)
    except OutOfFrame as exc:
        raise RasterSizeMismatch(
            f"raster covering {raster.frame_width}x{raster.frame_height} does not contain all features") from exc
    return [replace(f, label=LabelClass(int(lab))) for f, lab in zip(features, labels)]


def remove_movable(features, raster: LabelRaster, frame_size=None):
    if frame_size is not None and (raster.frame_width, raster.frame_height) != tuple(frame_size):
        raise RasterSizeMismatch(f"raster frame {raster.frame_width}x{raster.frame_height} != {frame_size}")
    out = []
    for f in _label_features(list(features), raster):
        if f.active and f.label is LabelClass.MOVABLE:
            f = replace(f, status=FeatureStatus.REMOVED_MOVABLE)
        out.append(f)
    return out


def baseline_z(pose_cur: Pose, center_prev) -> float:
    """|z| of the previous camera center expressed in the current camera frame."""
    return float(abs(pose_cur.rotation[2] @ np.asarray(center_prev, dtype=float) + pose_cur.translation[2]))


def adaptive_threshold(intr: CameraIntrinsics, l: float, d: float = PARALLAX_DISTANCE) -> float:
    return l / (2.0 * (l + d)) * math.hypot(intr.principal_x, intr.principal_y)


# step-by-step construction of the same threshold, kept as an independent check
def reference_pixel(intr: CameraIntrinsics) -> np.ndarray:
    return np.array([intr.principal_x / 2.0, intr.principal_y / 2.0])


def far_point(intr: CameraIntrinsics, d: float) -> np.ndarray:
    return back_project(intr, reference_pixel(intr), d)


def previous_keyframe_pixel(intr: CameraIntrinsics, l: float, d: float) -> np.ndarray:
    b = far_point(intr, d)
    return project(intr, Pose.identity(), b + np.array([0.0, 0.0, l]))


def threshold_by_construction(intr: CameraIntrinsics, l: float, d: float) -> float:
    return float(np.linalg.norm(reference_pixel(intr) - previous_keyframe_pixel(intr, l, d)))


class Tracker(Protocol):
    def track(self, prev_frame, cur_frame, features) -> dict: ...


@dataclass
class SSDBlockMatcher:
    """Integer-pixel block matcher; returns NaN for features without a match."""

    search_radius: int = 8
    patch_size: int = 11
    ssd_cap: float = 400.0  # mean squared difference per pixel

    @classmethod
    def for_threshold(cls, T: float, **kw) -> "SSDBlockMatcher":
        return cls(search_radius=int(math.ceil(2 * T)) + 8, **kw)

    def track(self, prev_frame, cur_frame, features) -> dict:
        prev = np.asarray(prev_frame, dtype=float)
        cur = np.asarray(cur_frame, dtype=float)
        if prev.shape != cur.shape:
            raise ValueError(f"frame shapes differ: {prev.shape} vs {cur.shape}")
        h, w = prev.shape
        r = self.patch_size // 2
        out = {}
        for f in features:
            x, y = int(round(f.position[0])), int(round(f.position[1]))
            if x - r < 0 or y - r < 0 or x + r >= w or y + r >= h:
                raise OutOfBounds(f"feature {f.id} at ({x}, {y}) within {r} px of the border")
            tmpl = prev[y - r:y + r + 1, x - r:x + r + 1]
            x0, x1 = max(r, x - self.search_radius), min(w - 1 - r, x + self.search_radius)
            y0, y1 = max(r, y - self.search_radius), min(h - 1 - r, y + self.search_radius)
            region = cur[y0 - r:y1 + r + 1, x0 - r:x1 + r + 1]
            windows = np.lib.stride_tricks.sliding_window_view(region, tmpl.shape)
            ssd = ((windows - tmpl) ** 2).mean(axis=(2, 3))
            iy, ix = np.unravel_index(np.argmin(ssd), ssd.shape)
            if ssd[iy, ix] > self.ssd_cap:
                out[f.id] = float("nan")
                continue
            out[f.id] = math.hypot(x0 + ix - x, y0 + iy - y)
        return out


@dataclass
class ReplayTracker:
    """Displacements looked up from precomputed values (file or simulator)."""

    table: Mapping = field(default_factory=dict)

    def track(self, prev_frame, cur_frame, features) -> dict:
        return {f.id: float(self.table.get(f.id, float("nan"))) for f in features}


def compute_displacements(prev_frame, cur_frame, features, tracker: Tracker) -> dict:
    """Per-feature displacement magnitude in pixels; NaN marks untrackable."""
    return tracker.track(prev_frame, cur_frame, list(features))


def filter_low_parallax(features, displacements: Mapping, raster: Optional[LabelRaster], T: float):
    features = list(features)
    if raster is not None:
        features = _label_features(features, raster)
    out = []
    for f in features:
        disp = displacements.get(f.id, float("nan"))
        # NaN compares False: untrackable features are kept
        if f.active and f.label is LabelClass.BACKGROUND and disp < T:
            f = replace(f, status=FeatureStatus.REMOVED_LOW_PARALLAX)
        out.append(f)
    return out


def read_displacements(path) -> dict:
    """``frame_id feature_id displacement_px`` records -> {frame_id: {feature_id: px}}."""
    table: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise MalformedLine(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        try:
            frame_id, feat_id, disp = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise MalformedLine(f"{path}:{lineno}: {exc}") from exc
        table.setdefault(frame_id, {})[feat_id] = disp
    return table


def write_displacements(table: Mapping, path) -> None:
    lines = [f"{fid} {feat} {disp!r}" for fid in sorted(table) for feat, disp in sorted(table[fid].items())]
    Path(path).write_text("".join(line + "\n" for line in lines))
