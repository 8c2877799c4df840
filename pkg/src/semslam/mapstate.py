"""Keyframes, features and labeled map points."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import UnknownKeyframe
from .geometry import Pose, camera_center
from .semantic_labels import LabelClass, LabelRaster


class FeatureStatus(enum.Enum):
    ACTIVE = "active"
    REMOVED_MOVABLE = "removed_movable"
    REMOVED_LOW_PARALLAX = "removed_low_parallax"


@dataclass(frozen=True)
class Feature:
    # id doubles as the track id: equal ids in different frames are one landmark
    id: int
    position: tuple
    label: Optional[LabelClass] = None
    status: FeatureStatus = FeatureStatus.ACTIVE

    @property
    def active(self) -> bool:
        return self.status is FeatureStatus.ACTIVE


@dataclass(eq=False)
class MapPoint:
    id: int
    track: int
    position: np.ndarray
    label: Optional[LabelClass] = None
    observers: list = field(default_factory=list)


class Keyframe:
    def __init__(self, index: int, frame_id: int, pose: Pose, features, raster: Optional[LabelRaster] = None):
        self.index = index
        self.frame_id = frame_id
        self.pose = pose
        self.raster = raster
        self.connected: tuple = ()
        self.refined = False
        self.features = features

    @property
    def features(self):
        return self._features

    @features.setter
    def features(self, feats):
        self._features = list(feats)
        self.feature_by_id = {f.id: f for f in self._features}

    @property
    def center(self) -> np.ndarray:
        return camera_center(self.pose)

    def active_ids(self) -> set:
        return {f.id for f in self._features if f.active}

    def __repr__(self):
        return f"Keyframe(index={self.index}, frame_id={self.frame_id}, n_features={len(self._features)})"


class MapState:
    def __init__(self):
        self.keyframes: list = []
        self.points: dict = {}
        self.track_to_point: dict = {}
        self.points_of_kf: dict = {}
        self.covisibility: dict = {}
        self.bootstrapped = False
        self.next_point_id = 0

    def keyframe(self, index: int) -> Keyframe:
        if not 0 <= index < len(self.keyframes):
            raise UnknownKeyframe(index)
        return self.keyframes[index]

    def add_keyframe(self, frame_id: int, pose: Pose, features) -> Keyframe:
        kf = Keyframe(len(self.keyframes), frame_id, pose, features)
        self.keyframes.append(kf)
        self.points_of_kf[kf.index] = set()
        return kf

    def add_point(self, track: int, position, observers, label=None) -> MapPoint:
        pid = self.next_point_id
        self.next_point_id += 1
        point = MapPoint(pid, track, np.asarray(position, dtype=float), label, sorted(observers))
        self.points[pid] = point
        self.track_to_point[track] = pid
        for kf in point.observers:
            self.points_of_kf[kf].add(pid)
        return point

    def add_observation(self, pid: int, kf_index: int) -> None:
        point = self.points[pid]
        if kf_index not in point.observers:
            point.observers.append(kf_index)
            point.observers.sort()
            self.points_of_kf[kf_index].add(pid)

    def set_shared(self, i: int, j: int, count: int) -> None:
        self.covisibility[(min(i, j), max(i, j))] = int(count)

    def shared(self, i: int, j: int) -> int:
        return self.covisibility.get((min(i, j), max(i, j)), 0)

    def points_of(self, kf_indices) -> list:
        """Sorted ids of points observed by any of ``kf_indices``."""
        out = set()
        for i in kf_indices:
            out |= self.points_of_kf.get(i, set())
        return sorted(out)

    def copy(self) -> "MapState":
        other = MapState()
        for kf in self.keyframes:
            k = Keyframe(kf.index, kf.frame_id, kf.pose, kf.features, kf.raster)
            k.connected = kf.connected
            k.refined = kf.refined
            other.keyframes.append(k)
        for pid, p in self.points.items():
            other.points[pid] = MapPoint(p.id, p.track, p.position.copy(), p.label, list(p.observers))
        other.track_to_point = dict(self.track_to_point)
        other.points_of_kf = {k: set(v) for k, v in self.points_of_kf.items()}
        other.covisibility = dict(self.covisibility)
        other.bootstrapped = self.bootstrapped
        other.next_point_id = self.next_point_id
        return other
