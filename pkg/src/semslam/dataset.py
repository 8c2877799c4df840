"""Frame sources: replay datasets on disk and the record handed to the pipeline.

Dataset directory layout::

    poses_est.txt         replay poses, KITTI format, line k is frame k
    poses_gt.txt          optional ground truth, same format
    features/<id>.csv     feature_id,u,v per line
    matches.csv           optional frame_a,feat_a,frame_b,feat_b records
    labels/<id>.pgm       optional label rasters (P5, class bytes 0..3)
    displacements.txt     optional frame_id feature_id displacement_px records
    images/<id>.pgm       optional 8-bit grayscale frames for the block matcher
    config.ini            optional key = value pipeline settings
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .config import PipelineConfig, load_ini
from .errors import DataError, MalformedHeader, MalformedLine
from .eval_io import Trajectory, read_kitti_poses, write_kitti_poses
from .feature_refinement import read_displacements
from .geometry import Pose
from .mapstate import Feature
from .semantic_labels import LabelRaster, _pgm_tokens, load_label_raster, write_label_raster

log = logging.getLogger(__name__)


@dataclass
class FrameBundle:
    frame_id: int
    pose: Optional[Pose]  # None: localization failed for this frame
    features: list


class FrameSource:
    """Interface the pipeline reads from. Rasters and images are fetched on
    demand, only for keyframes."""

    gt: Optional[Trajectory] = None

    def frames(self):
        raise NotImplementedError

    def raster(self, frame_id: int) -> Optional[LabelRaster]:
        return None

    def image(self, frame_id: int) -> Optional[np.ndarray]:
        return None

    def displacements(self, frame_id: int) -> Optional[dict]:
        return None


class ListSource(FrameSource):
    """In-memory source, mostly for tests."""

    def __init__(self, bundles, rasters=None, gt=None, displacements=None, images=None):
        self.bundles = list(bundles)
        self.rasters = dict(rasters or {})
        self.gt = gt
        self._disp = dict(displacements or {})
        self.images = dict(images or {})

    def frames(self):
        return iter(self.bundles)

    def raster(self, frame_id):
        return self.rasters.get(frame_id)

    def image(self, frame_id):
        return self.images.get(frame_id)

    def displacements(self, frame_id):
        return self._disp.get(frame_id)


def _index_dir(path: Path, suffix: str) -> dict:
    out = {}
    if not path.is_dir():
        return out
    for p in path.iterdir():
        if p.suffix != suffix:
            continue
        try:
            out[int(p.stem)] = p
        except ValueError:
            log.warning("ignoring %s: file stem is not a frame id", p)
    return out


def read_features(path) -> list:
    feats = []
    seen = set()
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and row[0].strip() == "feature_id":
                continue
            if len(row) != 3:
                raise MalformedLine(f"{path}:{lineno}: expected feature_id,u,v")
            try:
                fid, u, v = int(row[0]), float(row[1]), float(row[2])
            except ValueError as exc:
                raise MalformedLine(f"{path}:{lineno}: {exc}") from exc
            if fid in seen:
                raise MalformedLine(f"{path}:{lineno}: duplicate feature id {fid}")
            seen.add(fid)
            feats.append(Feature(fid, (u, v)))
    return feats


def write_features(features, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for f in features:
            w.writerow([f.id, repr(float(f.position[0])), repr(float(f.position[1]))])


def read_matches(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            if lineno == 1 and row[0].strip() == "frame_a":
                continue
            if len(row) != 4:
                raise MalformedLine(f"{path}:{lineno}: expected frame_a,feat_a,frame_b,feat_b")
            try:
                out.append(tuple(int(x) for x in row))
            except ValueError as exc:
                raise MalformedLine(f"{path}:{lineno}: {exc}") from exc
    return out


def track_ids_from_matches(matches) -> dict:
    """Union-find over (frame, feature) nodes. Components are numbered in
    order of their smallest (frame, feature) member."""
    parent: dict = {}

    def find(x):
        root = x
        while parent.setdefault(root, root) != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for fa, a, fb, b in matches:
        ra, rb = find((fa, a)), find((fb, b))
        if ra != rb:
            lo, hi = sorted((ra, rb))
            parent[hi] = lo
    roots = sorted({find(x) for x in parent})
    track_of_root = {r: k for k, r in enumerate(roots)}
    return {node: track_of_root[find(node)] for node in parent}


class DatasetSource(FrameSource):
    def __init__(self, root, cfg: Optional[PipelineConfig] = None):
        self.root = Path(root)
        if not self.root.is_dir():
            raise DataError(f"dataset directory {self.root} not found")
        est = self.root / "poses_est.txt"
        if not est.exists():
            raise DataError(f"{est} missing")
        self.cfg = cfg or self.load_config()
        self.poses = read_kitti_poses(est).poses
        gt_path = self.root / "poses_gt.txt"
        self.gt = read_kitti_poses(gt_path) if gt_path.exists() else None
        self.feature_files = _index_dir(self.root / "features", ".csv")
        if not self.feature_files:
            log.warning("dataset %s has no feature files", self.root)
        self.label_files = _index_dir(self.root / "labels", ".pgm")
        self.image_files = _index_dir(self.root / "images", ".pgm")
        disp = self.root / "displacements.txt"
        self._disp = read_displacements(disp) if disp.exists() else None
        matches = self.root / "matches.csv"
        self._tracks = track_ids_from_matches(read_matches(matches)) if matches.exists() else None
        self._n_tracks = len(set(self._tracks.values())) if self._tracks else 0

    def load_config(self) -> PipelineConfig:
        ini = self.root / "config.ini"
        return PipelineConfig.from_mapping(load_ini(ini)) if ini.exists() else PipelineConfig()

    def _features(self, frame_id: int) -> list:
        feats = read_features(self.feature_files[frame_id])
        if self._tracks is None:
            return feats
        # detector-local ids are turned into track ids; unmatched features get
        # fresh ids past every track
        base = self._n_tracks
        out = []
        for f in feats:
            tid = self._tracks.get((frame_id, f.id))
            if tid is None:
                tid = base + (frame_id << 20) + f.id
            out.append(Feature(tid, f.position))
        return out

    def frames(self):
        for fid in sorted(self.feature_files):
            pose = self.poses[fid] if fid < len(self.poses) else None
            yield FrameBundle(fid, pose, self._features(fid))

    def raster(self, frame_id):
        path = self.label_files.get(frame_id)
        if path is None:
            return None
        w, h = _pgm_size(path)
        scale = Fraction(self.cfg.width, w)
        return load_label_raster(path, scale, (self.cfg.width, self.cfg.height))

    def image(self, frame_id):
        path = self.image_files.get(frame_id)
        return read_pgm_image(path) if path is not None else None

    def displacements(self, frame_id):
        if self._disp is None:
            return None
        return self._disp.get(frame_id, {})


def _pgm_size(path):
    (magic, w, h, _), _ = _pgm_tokens(Path(path).read_bytes(), 4)
    if magic != b"P5":
        raise MalformedHeader(f"{path}: not a binary PGM")
    return int(w), int(h)


def read_pgm_image(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), off = _pgm_tokens(data, 4)
    w, h = int(w), int(h)
    if magic != b"P5" or maxval != b"255":
        raise MalformedHeader(f"{path}: expected an 8-bit binary PGM")
    payload = data[off:]
    if len(payload) != w * h:
        raise MalformedHeader(f"{path}: payload {len(payload)} bytes, expected {w * h}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).astype(float)


def write_pgm_image(img, path) -> None:
    arr = np.clip(np.round(np.asarray(img, dtype=float)), 0, 255).astype(np.uint8)
    h, w = arr.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes())


def write_dataset(source: FrameSource, out_dir, cfg: PipelineConfig, with_matches: bool = False,
                  with_rasters: bool = True, with_images: bool = False) -> Path:
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    if with_rasters:
        (out / "labels").mkdir(exist_ok=True)
    if with_images:
        (out / "images").mkdir(exist_ok=True)
    poses, prev = [], None
    match_rows = []
    for b in source.frames():
        if b.pose is None:
            raise DataError(f"frame {b.frame_id} has no pose; cannot export")
        poses.append(b.pose)
        write_features(b.features, out / "features" / f"{b.frame_id:06d}.csv")
        if with_rasters:
            r = source.raster(b.frame_id)
            if r is not None:
                write_label_raster(r, out / "labels" / f"{b.frame_id:06d}.pgm")
        if with_images:
            img = source.image(b.frame_id)
            if img is not None:
                write_pgm_image(img, out / "images" / f"{b.frame_id:06d}.pgm")
        if with_matches and prev is not None:
            ids = {f.id for f in b.features}
            match_rows += [(prev[0], fid, b.frame_id, fid) for fid in sorted(prev[1] & ids)]
        prev = (b.frame_id, {f.id for f in b.features})
    write_kitti_poses(poses, out / "poses_est.txt")
    if source.gt is not None:
        write_kitti_poses(source.gt, out / "poses_gt.txt")
    if with_matches:
        with open(out / "matches.csv", "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(match_rows)
    (out / "config.ini").write_text(cfg.to_ini())
    return out
