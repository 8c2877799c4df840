"""Deterministic synthetic driving scene.

The camera drives along a gently curving road at constant height above a flat
ground plane. Landmarks are road points, static roadside structure ("other"),
far background (mountains/sky) and moving cars. Every frame yields exact
feature projections whose ids are landmark ids, so correspondences are
globally consistent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .config import PipelineConfig, coerce_fields
from .dataset import FrameBundle, FrameSource, write_dataset
from .errors import BadConfig
from .eval_io import Trajectory
from .geometry import CameraIntrinsics, Pose, camera_center, project_many, rot_y
from .mapstate import Feature
from .semantic_labels import LabelClass, LabelRaster


@dataclass(frozen=True)
class SimConfig:
    n_frames: int = 600
    speed: float = 1.0  # m per frame
    yaw_amplitude: float = 0.1  # rad
    yaw_period: float = 2000.0  # frames

    h_real: float = 1.7
    focal_length: float = 718.0
    principal_x: float = 320.0
    principal_y: float = 240.0
    width: int = 640
    height: int = 480
    downsample_factor: Fraction = Fraction(2)
    max_features: int = 3000

    road_half_width: float = 6.0
    road_density: float = 1.0  # per m^2
    road_range: float = 40.0
    static_density: float = 0.5  # per m of road, per side
    static_lateral_min: float = 7.0
    static_lateral_max: float = 14.0
    static_max_height: float = 4.0
    static_range: float = 60.0
    n_background: int = 300
    background_min_distance: float = 500.0
    background_max_distance: float = 2000.0
    background_half_angle: float = 0.17  # rad, about the final heading
    n_cars: int = 30
    car_points: int = 12
    car_speed_min: float = 0.3
    car_speed_max: float = 1.5
    movable_range: float = 60.0
    near_clip: float = 2.0

    pixel_noise: float = 0.0
    splat_radius: int = 3

    def __post_init__(self):
        object.__setattr__(self, "downsample_factor", Fraction(self.downsample_factor))
        if self.n_frames < 2:
            raise BadConfig("n_frames must be >= 2")
        for name in ("speed", "h_real", "focal_length", "principal_x", "principal_y", "width",
                     "height", "downsample_factor", "road_half_width", "road_density",
                     "road_range", "near_clip", "background_min_distance", "max_features"):
            if not getattr(self, name) > 0:
                raise BadConfig(f"{name} must be positive")
        for name in ("n_background", "n_cars", "car_points", "static_density", "pixel_noise",
                     "splat_radius"):
            if getattr(self, name) < 0:
                raise BadConfig(f"{name} must be >= 0")
        if self.background_max_distance < self.background_min_distance:
            raise BadConfig("background_max_distance < background_min_distance")
        if self.n_cars and not 0 < self.car_speed_min <= self.car_speed_max:
            raise BadConfig("car speeds must satisfy 0 < min <= max")

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.focal_length, self.principal_x, self.principal_y)

    @classmethod
    def from_mapping(cls, values: dict, strict: bool = False) -> "SimConfig":
        return cls(**coerce_fields(cls, values, strict))

    def pipeline_config(self, **overrides) -> PipelineConfig:
        shared = {f.name: getattr(self, f.name) for f in fields(PipelineConfig)
                  if f.name in {g.name for g in fields(self)}}
        shared.update(overrides)
        return PipelineConfig(**shared)


@dataclass(eq=False)
class SimWorld:
    cfg: SimConfig
    seed: int
    centers: np.ndarray  # path samples, one per frame plus look-ahead
    headings: np.ndarray
    gt_poses: list
    base: np.ndarray  # landmark position at frame 0
    velocity: np.ndarray  # per-frame world velocity (movable only)
    labels: np.ndarray
    path_param: np.ndarray  # frame index of the path point a static landmark hangs off

    @property
    def n_landmarks(self) -> int:
        return len(self.labels)

    def positions_at(self, frame_id: int, idx=None) -> np.ndarray:
        if idx is None:
            return self.base + self.velocity * frame_id
        return self.base[idx] + self.velocity[idx] * frame_id


@dataclass(frozen=True)
class DriftModel:
    """Multiplicative per-frame scale drift, log-normal increments."""

    sigma: float = 0.0
    seed: int = 0
    bias: float = 0.0  # mean log increment
    initial_scale: float = 1.0  # arbitrary monocular initialization scale

    def __post_init__(self):
        if self.sigma < 0 or not self.initial_scale > 0:
            raise BadConfig(f"invalid drift model {self}")


def _heading(cfg: SimConfig, k):
    return cfg.yaw_amplitude * np.sin(2 * np.pi * np.asarray(k, dtype=float) / cfg.yaw_period)


def generate_world(cfg: SimConfig = SimConfig(), seed: int = 0) -> SimWorld:
    rng = np.random.default_rng(seed)
    lookahead = int(math.ceil(max(cfg.road_range, cfg.static_range, cfg.movable_range) / cfg.speed)) + 10
    n_path = cfg.n_frames + lookahead
    headings = _heading(cfg, np.arange(n_path))
    mid = _heading(cfg, np.arange(n_path) + 0.5)
    steps = cfg.speed * np.column_stack([np.sin(mid), np.zeros(n_path), np.cos(mid)])
    centers = np.vstack([np.zeros(3), np.cumsum(steps[:-1], axis=0)])
    gt_poses = [Pose.from_center(rot_y(-headings[k]), centers[k]) for k in range(cfg.n_frames)]

    def along(k):
        k = np.asarray(k, dtype=float)
        i = np.clip(np.floor(k).astype(int), 0, n_path - 2)
        w = (k - i)[:, None]
        c = centers[i] * (1 - w) + centers[i + 1] * w
        th = _heading(cfg, k)
        right = np.column_stack([np.cos(th), np.zeros(len(k)), -np.sin(th)])
        fwd = np.column_stack([np.sin(th), np.zeros(len(k)), np.cos(th)])
        return c, right, fwd

    k_lo, k_hi = -10.0 / cfg.speed, float(n_path - 1)
    length = (k_hi - k_lo) * cfg.speed
    blocks, labels, vels, params = [], [], [], []

    n_road = int(round(cfg.road_density * 2 * cfg.road_half_width * length))
    k = rng.uniform(k_lo, k_hi, n_road)
    c, right, _ = along(k)
    lat = rng.uniform(-cfg.road_half_width, cfg.road_half_width, n_road)
    road = c + lat[:, None] * right
    road[:, 1] = centers[0, 1] + cfg.h_real  # exactly on the plane y = h_real
    blocks.append(road)
    labels.append(np.full(n_road, LabelClass.ROAD))
    params.append(k)

    n_static = int(round(cfg.static_density * 2 * length))
    if n_static:
        k = rng.uniform(k_lo, k_hi, n_static)
        c, right, _ = along(k)
        lat = rng.uniform(cfg.static_lateral_min, cfg.static_lateral_max, n_static) * rng.choice([-1, 1], n_static)
        pts = c + lat[:, None] * right
        pts[:, 1] = cfg.h_real - rng.uniform(0.2, cfg.static_max_height, n_static)
        blocks.append(pts)
        labels.append(np.full(n_static, LabelClass.OTHER))
        params.append(k)

    n_static_total = sum(len(b) for b in blocks)
    vel_static = np.zeros((n_static_total, 3))

    if cfg.n_background:
        c_end = centers[cfg.n_frames - 1]
        th_end = headings[cfg.n_frames - 1]
        dist = rng.uniform(cfg.background_min_distance, cfg.background_max_distance, cfg.n_background)
        az = th_end + rng.uniform(-cfg.background_half_angle, cfg.background_half_angle, cfg.n_background)
        elev = rng.uniform(-0.01, 0.12, cfg.n_background)
        bg = c_end + np.column_stack([dist * np.sin(az), -dist * np.tan(elev), dist * np.cos(az)])
        # keep every background landmark at least min distance from the whole path
        near = np.min(np.linalg.norm(bg[:, None, :] - centers[None, :cfg.n_frames, :], axis=2), axis=1)
        assert np.all(near >= cfg.background_min_distance - 1e-9)
        blocks.append(bg)
        labels.append(np.full(cfg.n_background, LabelClass.BACKGROUND))
        params.append(np.full(cfg.n_background, np.nan))

    car_vel = []
    if cfg.n_cars and cfg.car_points:
        for _ in range(cfg.n_cars):
            k0 = rng.uniform(0, cfg.n_frames)
            side = rng.choice([-1.0, 1.0])
            c, right, fwd = along([k0])
            lane = side * rng.uniform(2.5, 4.0)
            speed = rng.uniform(cfg.car_speed_min, cfg.car_speed_max) * side
            body = np.column_stack([rng.uniform(-0.9, 0.9, cfg.car_points),
                                    -rng.uniform(0.1, 1.5, cfg.car_points),
                                    rng.uniform(-2.0, 2.0, cfg.car_points)])
            # body frame: x right, y down, z forward
            R_wb = np.column_stack([right[0], [0.0, 1.0, 0.0], fwd[0]])
            spawn = c[0] + lane * right[0] + body @ R_wb.T
            spawn[:, 1] = cfg.h_real + body[:, 1]
            v = speed * fwd[0]
            blocks.append(spawn - v * k0)
            labels.append(np.full(cfg.car_points, LabelClass.MOVABLE))
            params.append(np.full(cfg.car_points, np.nan))
            car_vel.append(np.tile(v, (cfg.car_points, 1)))

    base = np.vstack(blocks)
    velocity = np.vstack([vel_static, np.zeros((len(base) - n_static_total - sum(len(v) for v in car_vel), 3))]
                         + car_vel)
    return SimWorld(cfg, seed, centers, headings, gt_poses, base, velocity,
                    np.concatenate(labels).astype(np.uint8), np.concatenate(params))


def _class_range(cfg: SimConfig) -> np.ndarray:
    r = np.full(4, np.inf)
    r[LabelClass.ROAD] = cfg.road_range
    r[LabelClass.OTHER] = cfg.static_range
    r[LabelClass.MOVABLE] = cfg.movable_range
    return r


def _visible(world: SimWorld, frame_id: int):
    """Indices, pixel coordinates and depths of landmarks seen in ``frame_id``."""
    cfg = world.cfg
    horizon = max(cfg.road_range, cfg.static_range) / cfg.speed + 5
    p = world.path_param
    static_win = (p >= frame_id - 15 / cfg.speed) & (p <= frame_id + horizon)
    cand = np.flatnonzero(static_win | np.isnan(p))
    pose = world.gt_poses[frame_id]
    uv, z = project_many(cfg.intrinsics, pose, world.positions_at(frame_id, cand))
    rng_limit = _class_range(cfg)[world.labels[cand]]
    with np.errstate(invalid="ignore"):
        ok = (z > cfg.near_clip) & (z < rng_limit) & (uv[:, 0] >= 0) & (uv[:, 1] >= 0) \
            & (uv[:, 0] < cfg.width) & (uv[:, 1] < cfg.height)
    return cand[ok], uv[ok], z[ok]


@dataclass
class SimFrame:
    frame_id: int
    gt_pose: Pose
    features: list
    true_labels: dict  # landmark id -> LabelClass value
    raster: Optional[LabelRaster] = None


def render_frame(world: SimWorld, frame_id: int, with_raster: bool = True) -> SimFrame:
    cfg = world.cfg
    if not 0 <= frame_id < cfg.n_frames:
        raise IndexError(f"frame {frame_id} outside path of {cfg.n_frames} frames")
    idx, uv, z = _visible(world, frame_id)
    order = np.lexsort((idx, z))[: cfg.max_features]
    idx, uv = idx[order], uv[order]
    if cfg.pixel_noise > 0:
        noise_rng = np.random.default_rng([world.seed, frame_id])
        uv = uv + noise_rng.normal(0, cfg.pixel_noise, uv.shape)
        keep = (uv[:, 0] >= 0) & (uv[:, 1] >= 0) & (uv[:, 0] < cfg.width) & (uv[:, 1] < cfg.height)
        idx, uv = idx[keep], uv[keep]
    # features are reported in id order so files and runs are stable
    srt = np.argsort(idx, kind="stable")
    idx, uv = idx[srt], uv[srt]
    ids = idx.tolist()
    feats = [Feature(i, (u, v)) for i, u, v in zip(ids, uv[:, 0].tolist(), uv[:, 1].tolist())]
    true_labels = dict(zip(ids, world.labels[idx].tolist()))
    raster = render_raster(world, frame_id) if with_raster else None
    return SimFrame(frame_id, world.gt_poses[frame_id], feats, true_labels, raster)


def _disk_offsets(radius: int):
    r = radius + 1
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    return dx.ravel(), dy.ravel()


def render_raster(world: SimWorld, frame_id: int) -> LabelRaster:
    """Label raster at the configured downsampling: landmark labels splatted
    as disks over an "other" background; overlaps go to the landmark whose
    projection is nearest the pixel, then to the nearer landmark."""
    cfg = world.cfg
    s = cfg.downsample_factor
    rw, rh = int(cfg.width / s), int(cfg.height / s)
    data = np.full((rh, rw), LabelClass.OTHER, dtype=np.uint8)
    idx, uv, z = _visible(world, frame_id)
    if len(idx):
        ru, rv = uv[:, 0] / float(s), uv[:, 1] / float(s)
        dx, dy = _disk_offsets(cfg.splat_radius)
        cols = np.floor(ru + 0.5).astype(int)[:, None] + dx[None, :]
        rows = np.floor(rv + 0.5).astype(int)[:, None] + dy[None, :]
        d2 = (cols - ru[:, None]) ** 2 + (rows - rv[:, None]) ** 2
        ok = (d2 <= cfg.splat_radius ** 2) & (cols >= 0) & (rows >= 0) & (cols < rw) & (rows < rh)
        lm = np.broadcast_to(np.arange(len(idx))[:, None], cols.shape)[ok]
        pix = rows[ok] * rw + cols[ok]
        order = np.lexsort((idx[lm], z[lm], d2[ok], pix))
        pix_sorted = pix[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = pix_sorted[1:] != pix_sorted[:-1]
        win = order[first]
        data.reshape(-1)[pix[win]] = world.labels[idx[lm[win]]]
    return LabelRaster(rw, rh, data, s, cfg.width, cfg.height)


def render_image(world: SimWorld, frame_id: int, patch: int = 9) -> np.ndarray:
    """Grayscale frame with a fixed random texture patch stamped per landmark."""
    cfg = world.cfg
    img = np.full((cfg.height, cfg.width), 128.0)
    idx, uv, z = _visible(world, frame_id)
    r = patch // 2
    for j in np.argsort(-z, kind="stable"):
        lid = int(idx[j])
        tex = np.random.default_rng([world.seed, 7, lid]).uniform(0, 255, (patch, patch))
        x, y = int(round(uv[j, 0])), int(round(uv[j, 1]))
        x0, x1 = max(0, x - r), min(cfg.width, x + r + 1)
        y0, y1 = max(0, y - r), min(cfg.height, y + r + 1)
        if x0 >= x1 or y0 >= y1:
            continue
        img[y0:y1, x0:x1] = tex[y0 - (y - r):y1 - (y - r), x0 - (x - r):x1 - (x - r)]
    return img


def log_increments(n: int, model: DriftModel) -> np.ndarray:
    if model.sigma == 0:
        return np.full(n, float(model.bias))
    return np.random.default_rng(model.seed).normal(model.bias, model.sigma, n)


def inject_drift(gt_poses, model: DriftModel) -> list:
    """Scale each relative translation by the running product of exp(eps)."""
    gt_poses = list(gt_poses)
    if len(gt_poses) < 2:
        raise ValueError("need at least 2 poses")
    if model.sigma == 0 and model.bias == 0 and model.initial_scale == 1:
        return list(gt_poses)
    eps = log_increments(len(gt_poses) - 1, model)
    centers = np.array([camera_center(p) for p in gt_poses])
    out = [gt_poses[0]]
    c_prev = centers[0]
    factor = model.initial_scale
    for k in range(1, len(gt_poses)):
        factor *= math.exp(eps[k - 1])
        c_prev = c_prev + factor * (centers[k] - centers[k - 1])
        out.append(Pose.from_center(gt_poses[k].rotation, c_prev))
    return out


class SimSource(FrameSource):
    """Frame source backed by a simulated world and drifted replay poses."""

    def __init__(self, world: SimWorld, drift: DriftModel = DriftModel(), with_images: bool = False):
        self.world = world
        self.drift = drift
        self.with_images = with_images
        self.replay_poses = inject_drift(world.gt_poses, drift)
        self.gt = Trajectory(range(world.cfg.n_frames), world.gt_poses)
        self._frames = {}

    def __len__(self):
        return self.world.cfg.n_frames

    def sim_frame(self, frame_id: int) -> SimFrame:
        return render_frame(self.world, frame_id, with_raster=False)

    def frames(self):
        for k in range(self.world.cfg.n_frames):
            sf = self.sim_frame(k)
            yield FrameBundle(k, self.replay_poses[k], sf.features)

    def raster(self, frame_id: int):
        return render_raster(self.world, frame_id)

    def image(self, frame_id: int):
        return render_image(self.world, frame_id) if self.with_images else None

    def true_label(self, landmark_id: int) -> LabelClass:
        return LabelClass(int(self.world.labels[landmark_id]))


def simulate(cfg: SimConfig, seed: int = 0, drift: DriftModel = DriftModel()) -> SimSource:
    return SimSource(generate_world(cfg, seed), drift)


def export_dataset(source: SimSource, out_dir, pipeline_cfg: Optional[PipelineConfig] = None,
                   with_matches: bool = False) -> Path:
    cfg = pipeline_cfg or source.world.cfg.pipeline_config()
    return write_dataset(source, out_dir, cfg, with_matches=with_matches)
