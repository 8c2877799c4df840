"""Three-lane pipeline: replay localization, mapping, segmentation.

Localization runs on every frame and is never blocked. A frame flagged as a
keyframe candidate becomes a keyframe only when the mapping and segmentation
lanes are both idle; otherwise the candidate is discarded. A new keyframe
starts one mapping task (connectivity, triangulation, labeling, scale
correction) and one segmentation task (label raster, feature refinement).

Two executors share the same task bodies: a single-threaded scheduler on a
virtual clock driven by the lane cost model (the reference semantics), and a
thread-pool executor on the wall clock.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import threading
import time
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .clock import LOCALIZATION, MAPPING, SEGMENTATION, LaneClock, ms_to_us
from .config import PipelineConfig
from .dataset import FrameBundle, FrameSource
from .errors import (DegenerateBaseline, EmptyLog, NoConsensus, NonPositiveHeight,
                     OutOfBounds, OutOfOrderFrame, TooFewPoints)
from .eval_io import (Trajectory, ate_rmse, timing_report, trajectory_svg,
                      write_kitti_poses, write_report_csv)
from .feature_refinement import (SSDBlockMatcher, adaptive_threshold, baseline_z,
                                 filter_low_parallax, remove_movable)
from .geometry import Pose, triangulate_many
from .ground_plane import bootstrap_height, fit_plane_ransac, virtual_height
from .mapstate import Feature, FeatureStatus, MapState
from .scale_correction import apply_scale, compute_scale, should_correct
from .semantic_labels import LabelClass, assign_point_labels, sample_labels

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Similarity:
    """Center map ``c -> scale * c + offset`` applied to replay poses."""

    scale: float = 1.0
    offset: tuple = (0.0, 0.0, 0.0)

    def is_identity(self) -> bool:
        return self.scale == 1.0 and not any(self.offset)

    def apply(self, pose: Pose) -> Pose:
        if self.is_identity():
            return pose
        c = self.scale * pose.center + np.asarray(self.offset)
        return Pose.from_center(pose.rotation, c)

    def then_scale_about(self, pivot, s: float) -> "Similarity":
        pivot = np.asarray(pivot, dtype=float)
        off = s * np.asarray(self.offset) + (1.0 - s) * pivot
        return Similarity(s * self.scale, tuple(float(x) for x in off))


@dataclass
class CandidateRecord:
    frame_id: int
    t_us: int
    reason: str
    selected: bool = False
    keyframe: Optional[int] = None
    # lane completion times seen when the candidate was examined
    mapping_busy_until: int = 0
    segmentation_busy_until: int = 0


@dataclass
class ScaleEvent:
    keyframe: int
    kind: str  # "bootstrap" or "plane"
    factor: float
    applied: bool
    reason: str
    support: int
    height: float


@dataclass
class KeyframeSnapshot:
    """What the two keyframe tasks may read, fixed at selection time."""

    index: int
    frame_id: int
    pose: Pose
    features: list  # unrefined
    prev_frame_id: Optional[int]
    prev_center: Optional[np.ndarray]
    prev_positions: dict


class PipelineState:
    def __init__(self, cfg: PipelineConfig, source: Optional[FrameSource] = None, wallclock: bool = False):
        self.cfg = cfg
        self.source = source
        self.wallclock = wallclock
        self.map = MapState()
        self.clock = LaneClock()
        self.similarity = Similarity()
        self.pending: list = []  # (commit_us, Similarity), virtual mode only
        self.trajectory: dict = {}
        self.last_frame_id: Optional[int] = None
        self.last_kf_frame: Optional[int] = None
        self.last_kf_ids: set = set()
        self.candidate: Optional[tuple] = None
        self.candidates: list = []
        self.scale_events: list = []
        self.snapshots: dict = {}
        self.track_index: dict = defaultdict(list)  # track -> keyframes where it is active
        self.counters = Counter()
        self.warnings: list = []
        self.force_keyframes: Optional[set] = None
        self.lock = threading.RLock()

    def warn(self, msg: str) -> None:
        log.warning(msg)
        with self.lock:
            self.warnings.append(msg)


# --- localization lane -------------------------------------------------------

def candidate_reason(state: PipelineState, bundle: FrameBundle) -> Optional[str]:
    """Keyframe candidate policy; None means not a candidate."""
    if state.force_keyframes is not None:
        return "forced" if bundle.frame_id in state.force_keyframes else None
    cfg = state.cfg
    if state.last_kf_frame is None:
        return "first"
    if bundle.frame_id - state.last_kf_frame >= cfg.gap_frames:
        return "gap"
    if not state.last_kf_ids:
        return "ratio"
    tracked = len(state.last_kf_ids.intersection(f.id for f in bundle.features))
    if tracked / len(state.last_kf_ids) < cfg.tracked_ratio:
        return "ratio"
    return None


def _commit_due(state: PipelineState, t_us: int) -> None:
    while state.pending and state.pending[0][0] <= t_us:
        state.similarity = state.pending.pop(0)[1]


def _localize(state: PipelineState, bundle: FrameBundle, start_us: int) -> Optional[Pose]:
    if state.last_frame_id is not None and bundle.frame_id <= state.last_frame_id:
        raise OutOfOrderFrame(f"frame {bundle.frame_id} after {state.last_frame_id}")
    state.last_frame_id = bundle.frame_id
    state.counters["frames_total"] += 1
    if bundle.pose is None:
        state.counters["frames_lost"] += 1
        return None
    with state.lock:
        if not state.wallclock:
            _commit_due(state, start_us)
        est = state.similarity.apply(bundle.pose)
    state.counters["frames_localized"] += 1
    state.trajectory[bundle.frame_id] = est
    return est


def _flag(state: PipelineState, bundle: FrameBundle, est, end_us: int) -> bool:
    reason = candidate_reason(state, bundle) if est is not None else None
    if reason is None:
        state.candidate = None
        return False
    state.candidate = (bundle, end_us)
    state.candidates.append(CandidateRecord(bundle.frame_id, end_us, reason))
    state.counters["candidates_flagged"] += 1
    return True


def submit_frame(state: PipelineState, bundle: FrameBundle) -> bool:
    """Localize one frame on the virtual clock; True if it is a keyframe candidate."""
    start = state.clock.busy_until[LOCALIZATION]
    est = _localize(state, bundle, start)
    end = state.clock.charge(LOCALIZATION, "tracking", bundle.frame_id, start,
                             ms_to_us(state.cfg.cost_localization_ms))
    return _flag(state, bundle, est, end)


def select_keyframe(state: PipelineState, idle: Optional[bool] = None) -> Optional[int]:
    """Promote the pending candidate if both keyframe lanes are idle, else drop it."""
    if state.candidate is None:
        return None
    bundle, t_us = state.candidate
    state.candidate = None
    rec = state.candidates[-1]
    rec.mapping_busy_until = state.clock.busy_until[MAPPING]
    rec.segmentation_busy_until = state.clock.busy_until[SEGMENTATION]
    if idle is None:
        idle = state.clock.idle_at(t_us)
    if not idle:
        state.counters["candidates_discarded"] += 1
        return None
    with state.lock:
        if not state.wallclock:
            _commit_due(state, t_us)
        pose = state.similarity.apply(bundle.pose)
        state.trajectory[bundle.frame_id] = pose
        m = state.map
        feats = [Feature(f.id, tuple(f.position)) for f in bundle.features[: state.cfg.features_per_frame]]
        kf = m.add_keyframe(bundle.frame_id, pose, feats)
        prev = m.keyframes[kf.index - 1] if kf.index > 0 else None
        state.snapshots[kf.index] = KeyframeSnapshot(
            kf.index, kf.frame_id, pose, feats,
            prev.frame_id if prev else None,
            prev.center.copy() if prev else None,
            {f.id: f.position for f in prev.features} if prev else {})
    state.last_kf_frame = bundle.frame_id
    state.last_kf_ids = {f.id for f in feats}
    rec.selected = True
    rec.keyframe = kf.index
    state.counters["keyframes"] += 1
    return kf.index


# --- mapping lane --------------------------------------------------------------

def connected_set(state: PipelineState, kf_index: int) -> tuple:
    """Earlier keyframes sharing at least ``connectivity_min`` correspondences."""
    m = state.map
    cmin = state.cfg.connectivity_min
    return tuple(j for j in range(kf_index) if m.shared(j, kf_index) >= cmin)


def _update_connectivity(state: PipelineState, i: int) -> tuple:
    m = state.map
    snap = state.snapshots[i]
    with state.lock:
        counts = Counter(j for f in snap.features for j in state.track_index.get(f.id, ()) if j < i)
    for j, c in counts.items():
        m.set_shared(j, i, c)
    conn = connected_set(state, i)
    m.keyframes[i].connected = conn
    return conn


def _triangulate(state: PipelineState, i: int) -> list:
    """Connectivity, new points against refined connected features, labels."""
    cfg = state.cfg
    m = state.map
    snap = state.snapshots[i]
    kf = m.keyframes[i]
    conn = _update_connectivity(state, i)
    conn_set = set(conn)
    pos_i = {f.id: f.position for f in snap.features}

    for f in snap.features:
        pid = m.track_to_point.get(f.id)
        if pid is not None:
            m.add_observation(pid, i)

    by_partner = defaultdict(list)
    with state.lock:
        for f in snap.features:
            if f.id in m.track_to_point:
                continue
            partners = [j for j in state.track_index.get(f.id, ()) if j in conn_set]
            if partners:
                by_partner[max(partners)].append((f.id, partners))

    new_pids = []
    for j in sorted(by_partner, reverse=True):
        kj = m.keyframes[j]
        items = by_partner[j]
        qa = [kj.feature_by_id[t].position for t, _ in items]
        qb = [pos_i[t] for t, _ in items]
        try:
            pts, ok = triangulate_many(cfg.intrinsics, kj.pose, kf.pose, qa, qb)
        except DegenerateBaseline:
            state.counters["triangulation_failures"] += len(items)
            continue
        for (t, partners), x, good in zip(items, pts, ok):
            if not good:
                state.counters["triangulation_failures"] += 1
                continue
            new_pids.append(m.add_point(t, x, partners + [i]).id)

    # the current keyframe's raster is produced concurrently and never votes
    missing = assign_point_labels(m, new_pids, exclude=(i,), skip_missing=True)
    state.counters["points_unlabeled"] += len(missing)
    return new_pids


def _road_points(m: MapState, pids) -> np.ndarray:
    pts = [m.points[p].position for p in pids if m.points[p].label is LabelClass.ROAD]
    return np.array(pts, dtype=float).reshape(-1, 3)


def _correct_scale(state: PipelineState, i: int, new_pids) -> Optional[Similarity]:
    """Scale correction for keyframe ``i``; returns the replay similarity to
    commit, or None when the map was left unchanged."""
    cfg = state.cfg
    m = state.map
    kf = m.keyframes[i]
    c = kf.center
    scope = (i,) + kf.connected
    if not m.bootstrapped:
        road = _road_points(m, m.points_of(scope))
        if len(road) < cfg.bootstrap_min_points:
            state.counters["bootstrap_deferred"] += 1
            return None
        h = bootstrap_height(c, road, cfg.bootstrap_min_points)
        m.bootstrapped = True
        state.counters["bootstrap_keyframe"] = i
        try:
            s = compute_scale(cfg.h_real, h)
        except NonPositiveHeight:
            state.scale_events.append(ScaleEvent(i, "bootstrap", math.nan, False, "zero_height", len(road), h))
            return None
        # the initial monocular scale is arbitrary: no upper bound here
        applied = abs(s - 1.0) > cfg.scale_lower
        state.scale_events.append(ScaleEvent(i, "bootstrap", s, applied,
                                             "applied" if applied else "too_small", len(road), h))
    else:
        pids = new_pids if cfg.plane_support == "current" else m.points_of(scope)
        road = _road_points(m, pids)
        rcfg = dataclasses.replace(cfg.ransac, seed=cfg.seed * 1_000_003 + i)
        try:
            plane, inliers = fit_plane_ransac(road, rcfg)
            h = virtual_height(plane, c)
            s = compute_scale(cfg.h_real, h)
        except (TooFewPoints, NoConsensus, NonPositiveHeight) as exc:
            state.counters["corrections_skipped"] += 1
            state.scale_events.append(ScaleEvent(i, "plane", math.nan, False, type(exc).__name__,
                                                 len(road), math.nan))
            return None
        decision = should_correct(s, cfg.scale_lower, cfg.scale_upper)
        applied = decision.applied
        state.scale_events.append(ScaleEvent(i, "plane", s, applied, decision.reason.value,
                                             len(inliers), h))
        if not applied:
            state.counters["corrections_rejected_" + decision.reason.value] += 1
    if not applied:
        return None
    apply_scale(m, i, s)
    state.counters["corrections_applied"] += 1
    with state.lock:
        base = state.pending[-1][1] if state.pending else state.similarity
    return base.then_scale_about(c, s)


def mapping_task(state: PipelineState, kf_index: int, start_us: Optional[int] = None) -> int:
    """Run the mapping task on the virtual clock; returns its end time (us)."""
    cfg = state.cfg
    start = state.clock.busy_until[MAPPING] if start_us is None else start_us
    new_pids = _triangulate(state, kf_index)
    end = state.clock.charge(MAPPING, "triangulation", kf_index, start, ms_to_us(cfg.cost_triangulation_ms))
    if cfg.scale_correction:
        sim = _correct_scale(state, kf_index, new_pids)
        end = state.clock.charge(MAPPING, "scale_correction", kf_index, end,
                                 ms_to_us(cfg.cost_scale_correction_ms))
        if sim is not None:
            state.pending.append((end, sim))
    return end


# --- segmentation lane ---------------------------------------------------------

def _displacements(state: PipelineState, snap: KeyframeSnapshot, feats, T: float) -> dict:
    cfg = state.cfg
    src = state.source
    if cfg.tracker == "replay":
        table = src.displacements(snap.frame_id) if src is not None else None
        if table is not None:
            return {f.id: float(table.get(f.id, math.nan)) for f in feats}
        out = {}
        for f in feats:
            p = snap.prev_positions.get(f.id)
            out[f.id] = math.nan if p is None else math.hypot(f.position[0] - p[0], f.position[1] - p[1])
        return out
    prev_img = src.image(snap.prev_frame_id) if src is not None else None
    cur_img = src.image(snap.frame_id) if src is not None else None
    if prev_img is None or cur_img is None:
        state.warn(f"keyframe {snap.index}: no images for the block matcher")
        return {f.id: math.nan for f in feats}
    matcher = SSDBlockMatcher.for_threshold(T)
    out = {}
    for f in feats:
        p = snap.prev_positions.get(f.id)
        if p is None:
            out[f.id] = math.nan
            continue
        try:
            out.update(matcher.track(prev_img, cur_img, [Feature(f.id, p)]))
        except OutOfBounds:
            out[f.id] = math.nan
    return out


def _refine(state: PipelineState, snap: KeyframeSnapshot, raster):
    cfg = state.cfg
    feats = list(snap.features)
    if not cfg.feature_refinement:
        uv = np.array([f.position for f in feats], dtype=float).reshape(-1, 2)
        labels = sample_labels(raster, uv)
        return [dataclasses.replace(f, label=LabelClass(int(lab))) for f, lab in zip(feats, labels)]
    feats = remove_movable(feats, raster, (cfg.width, cfg.height))
    if snap.prev_center is None:
        return feats
    l = baseline_z(snap.pose, snap.prev_center)
    T = adaptive_threshold(cfg.intrinsics, l, cfg.parallax_distance)
    bg = [f for f in feats if f.active and f.label is LabelClass.BACKGROUND]
    disp = _displacements(state, snap, bg, T)
    state.counters["features_untrackable"] += sum(1 for v in disp.values() if math.isnan(v))
    return filter_low_parallax(feats, disp, None, T)


def _acquire_raster(state: PipelineState, snap: KeyframeSnapshot):
    raster = state.source.raster(snap.frame_id) if state.source is not None else None
    if raster is None:
        state.counters["rasters_missing"] += 1
        state.warn(f"keyframe {snap.index} (frame {snap.frame_id}): no label raster, left unrefined")
    return raster


def _commit_segmentation(state: PipelineState, i: int, feats, raster) -> None:
    with state.lock:
        kf = state.map.keyframes[i]
        kf.features = feats
        kf.raster = raster
        kf.refined = raster is not None and state.cfg.feature_refinement
        for f in feats:
            if f.active:
                state.track_index[f.id].append(i)
            elif f.status is FeatureStatus.REMOVED_MOVABLE:
                state.counters["features_removed_movable"] += 1
            else:
                state.counters["features_removed_low_parallax"] += 1


def segmentation_task(state: PipelineState, kf_index: int, start_us: Optional[int] = None) -> int:
    """Run the segmentation task on the virtual clock; returns its end time (us)."""
    cfg = state.cfg
    snap = state.snapshots[kf_index]
    start = state.clock.busy_until[SEGMENTATION] if start_us is None else start_us
    raster = _acquire_raster(state, snap)
    end = state.clock.charge(SEGMENTATION, "segmentation", kf_index, start, ms_to_us(cfg.segmentation_ms))
    feats = snap.features
    if raster is not None:
        feats = _refine(state, snap, raster)
        if cfg.feature_refinement:
            end = state.clock.charge(SEGMENTATION, "feature_refinement", kf_index, end,
                                     ms_to_us(cfg.cost_feature_refinement_ms))
    _commit_segmentation(state, kf_index, feats, raster)
    return end


# --- executors -----------------------------------------------------------------

@dataclass
class RunReport:
    config: PipelineConfig
    trajectory: Trajectory
    keyframes: Trajectory
    gt: Optional[Trajectory]
    map: MapState
    task_log: list
    candidates: list
    scale_events: list
    counters: dict
    warnings: list = field(default_factory=list)

    @property
    def tracking_times_ms(self) -> list:
        return [r.duration_ms for r in self.task_log if r.lane == LOCALIZATION]

    def ate(self) -> float:
        """ATE over keyframes when any exist, otherwise over all frames."""
        if self.gt is None:
            raise ValueError("no ground truth")
        return ate_rmse(self.keyframes if len(self.keyframes) else self.trajectory, self.gt)


COUNTER_KEYS = ("frames_total", "frames_localized", "frames_lost", "keyframes", "candidates_flagged",
                "candidates_discarded", "map_points", "points_unlabeled", "triangulation_failures",
                "bootstrap_keyframe", "bootstrap_deferred", "corrections_applied",
                "corrections_rejected_too_small", "corrections_rejected_too_large", "corrections_skipped",
                "features_removed_movable", "features_removed_low_parallax", "features_untrackable",
                "rasters_missing")


def _finish(state: PipelineState) -> RunReport:
    m = state.map
    traj = dict(state.trajectory)
    for kf in m.keyframes:
        traj[kf.frame_id] = kf.pose
    ids = sorted(traj)
    trajectory = Trajectory(ids, [traj[i] for i in ids])
    keyframes = Trajectory([kf.frame_id for kf in m.keyframes], [kf.pose for kf in m.keyframes])
    gt = state.source.gt if state.source is not None else None
    counters = {k: int(state.counters.get(k, -1 if k == "bootstrap_keyframe" else 0)) for k in COUNTER_KEYS}
    counters["map_points"] = len(m.points)
    total = counters["frames_total"]
    counters["tracking_success_pct"] = 100.0 * counters["frames_localized"] / total if total else 0.0
    loc = [r.duration_ms for r in state.clock.log if r.lane == LOCALIZATION]
    counters["tracking_time_mean_ms"] = float(np.mean(loc)) if loc else 0.0
    if gt is not None and len(trajectory):
        try:
            counters["ate_keyframes_m"] = ate_rmse(keyframes, gt) if len(keyframes) else math.nan
            counters["ate_frames_m"] = ate_rmse(trajectory, gt)
        except Exception as exc:  # EmptyOverlap: report, do not fail the run
            state.warn(f"ATE not computed: {exc}")
    return RunReport(state.cfg, trajectory, keyframes, gt, m, list(state.clock.log), list(state.candidates),
                     list(state.scale_events), counters, list(state.warnings))


def run(cfg: PipelineConfig, source: FrameSource, force_keyframes=None) -> RunReport:
    """Reference single-threaded scheduler on the virtual clock."""
    state = PipelineState(cfg, source)
    if force_keyframes is not None:
        state.force_keyframes = set(force_keyframes)
    for bundle in source.frames():
        if submit_frame(state, bundle):
            i = select_keyframe(state)
            if i is not None:
                t = state.candidates[-1].t_us
                mapping_task(state, i, t)
                segmentation_task(state, i, t)
    return _finish(state)


class _WallTimer:
    def __init__(self, pace: bool):
        self.t0 = time.perf_counter_ns()
        self.pace = pace

    def now(self) -> int:
        return (time.perf_counter_ns() - self.t0) // 1000

    def finish(self, start_us: int, cost_ms: float) -> int:
        """Sleep out the modeled cost when pacing; return the end time."""
        if self.pace:
            remaining = start_us + ms_to_us(cost_ms) - self.now()
            if remaining > 0:
                time.sleep(remaining / 1e6)
        return self.now()


def run_wallclock(cfg: PipelineConfig, source: FrameSource, pace: bool = False,
                  force_keyframes=None) -> RunReport:
    """Threaded executor: localization on the calling thread, one worker per
    keyframe lane. Map mutations and the replay similarity are committed under
    the state lock at task boundaries."""
    state = PipelineState(cfg, source, wallclock=True)
    if force_keyframes is not None:
        state.force_keyframes = set(force_keyframes)
    timer = _WallTimer(pace)

    def record(lane, task, key, start, end):
        with state.lock:
            state.clock.record(lane, task, key, start, end)

    def mapping(i):
        t = timer.now()
        new_pids = _triangulate(state, i)
        end = timer.finish(t, cfg.cost_triangulation_ms)
        record(MAPPING, "triangulation", i, t, end)
        if cfg.scale_correction:
            t = timer.now()
            sim = _correct_scale(state, i, new_pids)
            if sim is not None:
                with state.lock:
                    state.similarity = sim
            record(MAPPING, "scale_correction", i, t, timer.finish(t, cfg.cost_scale_correction_ms))

    def segmentation(i):
        snap = state.snapshots[i]
        t = timer.now()
        raster = _acquire_raster(state, snap)
        record(SEGMENTATION, "segmentation", i, t, timer.finish(t, cfg.segmentation_ms))
        feats = snap.features
        if raster is not None:
            t = timer.now()
            feats = _refine(state, snap, raster)
            if cfg.feature_refinement:
                record(SEGMENTATION, "feature_refinement", i, t, timer.finish(t, cfg.cost_feature_refinement_ms))
        _commit_segmentation(state, i, feats, raster)

    futures = []
    with ThreadPoolExecutor(max_workers=2, thread_name_prefix="semslam") as pool:
        for bundle in source.frames():
            t = timer.now()
            est = _localize(state, bundle, t)
            end = timer.finish(t, cfg.cost_localization_ms)
            record(LOCALIZATION, "tracking", bundle.frame_id, t, end)
            if not _flag(state, bundle, est, end):
                continue
            if state.force_keyframes is not None:
                for f in futures:
                    f.result()
            idle = all(f.done() for f in futures)
            for f in futures:
                if f.done():
                    f.result()  # surface worker exceptions
            i = select_keyframe(state, idle=idle)
            if i is not None:
                futures = [pool.submit(mapping, i), pool.submit(segmentation, i)]
        for f in futures:
            f.result()
    return _finish(state)


# --- reports -------------------------------------------------------------------

def write_report(report: RunReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report.counters, out / "report.csv")
    try:
        (out / "timing.csv").write_text(timing_report(report.task_log).to_csv())
    except EmptyLog:
        (out / "timing.csv").write_text("# empty task log\n")
    write_kitti_poses(report.trajectory, out / "trajectory_est.txt")
    (out / "trajectory_frames.txt").write_text("".join(f"{i}\n" for i in report.trajectory.frame_ids))
    if report.gt is not None:
        write_kitti_poses(report.gt, out / "trajectory_gt.txt")
    rows = ["index,frame_id,features,active,connected,refined,points"]
    for kf in report.map.keyframes:
        rows.append(f"{kf.index},{kf.frame_id},{len(kf.features)},{len(kf.active_ids())},"
                    f"{len(kf.connected)},{int(kf.refined)},{len(report.map.points_of_kf[kf.index])}")
    (out / "keyframes.csv").write_text("\n".join(rows) + "\n")
    rows = ["keyframe,kind,factor,applied,reason,support,height"]
    for e in report.scale_events:
        rows.append(f"{e.keyframe},{e.kind},{e.factor!r},{int(e.applied)},{e.reason},{e.support},{e.height!r}")
    (out / "scale_events.csv").write_text("\n".join(rows) + "\n")
    rows = ["frame_id,t_us,reason,selected,keyframe,mapping_busy_until,segmentation_busy_until"]
    for c in report.candidates:
        rows.append(f"{c.frame_id},{c.t_us},{c.reason},{int(c.selected)},"
                    f"{'' if c.keyframe is None else c.keyframe},{c.mapping_busy_until},{c.segmentation_busy_until}")
    (out / "candidates.csv").write_text("\n".join(rows) + "\n")
    if len(report.trajectory):
        (out / "trajectory.svg").write_text(trajectory_svg(report.keyframes if len(report.keyframes)
                                                           else report.trajectory, report.gt))
    return out
