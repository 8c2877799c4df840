"""Trajectory I/O (KITTI pose format), ATE, success rate and timing reports."""
from __future__ import annotations

import csv
import io
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clock import LOCALIZATION
from .errors import EmptyLog, EmptyOverlap, MalformedLine, NonRotationMatrix
from .geometry import Pose, camera_center, is_rotation, nearest_rotation

READ_ORTHO_TOL = 1e-6


@dataclass
class Trajectory:
    frame_ids: list
    poses: list

    def __post_init__(self):
        self.frame_ids = [int(i) for i in self.frame_ids]
        self.poses = list(self.poses)
        if len(self.frame_ids) != len(self.poses):
            raise ValueError("frame_ids and poses differ in length")
        if any(b <= a for a, b in zip(self.frame_ids, self.frame_ids[1:])):
            raise ValueError("trajectory frame ids must be strictly increasing")

    def __len__(self):
        return len(self.poses)

    def centers(self) -> np.ndarray:
        return np.array([camera_center(p) for p in self.poses]).reshape(-1, 3)

    def as_dict(self) -> dict:
        return dict(zip(self.frame_ids, self.poses))

    def subset(self, frame_ids) -> "Trajectory":
        wanted = set(frame_ids)
        pairs = [(i, p) for i, p in zip(self.frame_ids, self.poses) if i in wanted]
        return Trajectory([i for i, _ in pairs], [p for _, p in pairs])


def format_pose(pose: Pose) -> str:
    return " ".join("%.17g" % v for v in pose.matrix.reshape(-1))


def parse_pose(line: str, where: str = "") -> Pose:
    parts = line.split()
    if len(parts) != 12:
        raise MalformedLine(f"{where}: expected 12 values, got {len(parts)}")
    try:
        vals = np.array([float(p) for p in parts])
    except ValueError as exc:
        raise MalformedLine(f"{where}: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise MalformedLine(f"{where}: non-finite value")
    M = vals.reshape(3, 4)
    R = M[:, :3]
    if not is_rotation(R, READ_ORTHO_TOL):
        raise NonRotationMatrix(f"{where}: rotation block is not orthonormal")
    if not is_rotation(R):
        # tolerated on read, snapped so downstream invariants hold
        R = nearest_rotation(R)
    return Pose(R, M[:, 3])


def read_kitti_poses(path) -> Trajectory:
    poses = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        poses.append(parse_pose(line, f"{path}:{lineno}"))
    return Trajectory(range(len(poses)), poses)


def write_kitti_poses(traj, path) -> None:
    poses = traj.poses if isinstance(traj, Trajectory) else list(traj)
    Path(path).write_text("".join(format_pose(p) + "\n" for p in poses))


def ate_rmse(est: Trajectory, gt: Trajectory) -> float:
    """RMSE of camera-center distances over common frame ids, no alignment."""
    gt_map = gt.as_dict()
    common = [(p, gt_map[i]) for i, p in zip(est.frame_ids, est.poses) if i in gt_map]
    if not common:
        raise EmptyOverlap("trajectories share no frame ids")
    err = np.array([camera_center(a) - camera_center(b) for a, b in common])
    return float(math.sqrt(np.mean(np.sum(err ** 2, axis=1))))


def tracking_success_rate(report) -> float:
    total = report.counters["frames_total"]
    if total <= 0:
        raise ValueError("report has no frames")
    return 100.0 * report.counters["frames_localized"] / total


@dataclass(frozen=True)
class Stat:
    count: int
    mean_ms: float
    std_ms: float


def _stat(values_us) -> Stat:
    vals = [v / 1000 for v in values_us]
    std = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return Stat(len(vals), sum(values_us) / len(values_us) / 1000, std)


@dataclass
class TimingReport:
    rows: dict  # (lane, task) -> Stat; task "total" sums a lane's tasks per key

    @property
    def tracking_time(self) -> Stat:
        return self.rows[(LOCALIZATION, "total")]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# std_ms is the sample (n-1) standard deviation\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lane", "task", "count", "mean_ms", "std_ms"])
        for (lane, task), st in self.rows.items():
            w.writerow([lane, task, st.count, "%.6f" % st.mean_ms, "%.6f" % st.std_ms])
        return buf.getvalue()


def timing_report(task_log) -> TimingReport:
    task_log = list(task_log)
    if not task_log:
        raise EmptyLog("task log is empty")
    per_task = defaultdict(list)
    per_lane_key = defaultdict(lambda: defaultdict(int))
    for rec in task_log:
        dur = rec.end_us - rec.start_us
        per_task[(rec.lane, rec.task)].append(dur)
        per_lane_key[rec.lane][rec.key] += dur
    rows = {}
    for lane in sorted(per_lane_key, key=lambda x: (x != LOCALIZATION, x)):
        for (ln, task), durs in per_task.items():
            if ln == lane:
                rows[(lane, task)] = _stat(durs)
        rows[(lane, "total")] = _stat(list(per_lane_key[lane].values()))
    return TimingReport(rows)


def write_report_csv(counters: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in counters.items():
            w.writerow([k, repr(v) if isinstance(v, float) else v])


def trajectory_svg(est: Trajectory, gt: Trajectory = None, size: int = 600) -> str:
    """Top-down (x-z) plot: estimate solid, ground truth dashed."""
    tracks = [(est.centers(), "")]
    if gt is not None and len(gt):
        tracks.append((gt.centers(), ' stroke-dasharray="6,4"'))
    allpts = np.vstack([c for c, _ in tracks if len(c)]) if any(len(c) for c, _ in tracks) else np.zeros((1, 3))
    lo = allpts[:, [0, 2]].min(axis=0)
    hi = allpts[:, [0, 2]].max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-9)
    margin = 20
    k = (size - 2 * margin) / span

    def pts(c):
        return " ".join("%.2f,%.2f" % (margin + (x - lo[0]) * k, size - margin - (z - lo[1]) * k)
                        for x, z in c[:, [0, 2]])

    colors = ["#1f77b4", "#d62728"]
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
    for (c, dash), color in zip(tracks, colors):
        lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts(c)}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
