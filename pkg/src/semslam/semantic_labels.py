"""Label taxonomy, label rasters (binary PGM), sampling, point labels and IoU."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (IllegalClassByte, MalformedHeader, NoObservation, OutOfFrame,
                     SizeMismatch)


class LabelClass(enum.IntEnum):
    OTHER = 0
    ROAD = 1
    MOVABLE = 2
    BACKGROUND = 3


EVALUATED_CLASSES = (LabelClass.ROAD, LabelClass.MOVABLE, LabelClass.BACKGROUND)


@dataclass(eq=False)
class LabelRaster:
    width: int
    height: int
    data: np.ndarray
    scale: Fraction = Fraction(1)
    frame_width: Optional[int] = None
    frame_height: Optional[int] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.uint8).reshape(self.height, self.width)
        self.scale = Fraction(self.scale)
        if np.any(self.data > 3):
            bad = int(self.data[self.data > 3][0])
            raise IllegalClassByte(f"class byte {bad} not in {{0,1,2,3}}")
        if self.frame_width is None:
            self.frame_width = math.ceil(self.width * self.scale)
        if self.frame_height is None:
            self.frame_height = math.ceil(self.height * self.scale)

    def __eq__(self, other):
        if not isinstance(other, LabelRaster):
            return NotImplemented
        return (self.width, self.height, self.scale) == (other.width, other.height, other.scale) \
            and np.array_equal(self.data, other.data)

    __hash__ = None


def _pgm_tokens(buf: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(buf):
            raise MalformedHeader("truncated PGM header")
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the payload
    return tokens, pos + 1


def load_label_raster(path, scale=1, frame_size=None) -> LabelRaster:
    buf = Path(path).read_bytes()
    tokens, pos = _pgm_tokens(buf, 4)
    if tokens[0] != b"P5":
        raise MalformedHeader(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MalformedHeader(f"{path}: non-integer header field") from exc
    if width <= 0 or height <= 0 or maxval != 255:
        raise MalformedHeader(f"{path}: unsupported header {width}x{height} maxval {maxval}")
    payload = buf[pos:]
    if len(payload) != width * height:
        raise SizeMismatch(f"{path}: payload {len(payload)} bytes, expected {width * height}")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    raster = LabelRaster(width, height, data.copy(), Fraction(scale))
    if frame_size is not None:
        fw, fh = frame_size
        if (math.ceil(width * raster.scale), math.ceil(height * raster.scale)) != (fw, fh) and \
                (math.floor(width * raster.scale), math.floor(height * raster.scale)) != (fw, fh):
            raise SizeMismatch(f"{path}: {width}x{height} at scale {raster.scale} "
                               f"does not cover frame {fw}x{fh}")
        raster.frame_width, raster.frame_height = fw, fh
    return raster


def write_label_raster(raster: LabelRaster, path) -> None:
    header = f"P5\n{raster.width} {raster.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + np.ascontiguousarray(raster.data, dtype=np.uint8).tobytes())


def _raster_index(raster: LabelRaster, u, v):
    s = float(raster.scale)
    col = np.clip(np.floor(np.asarray(u, dtype=float) / s + 0.5).astype(int), 0, raster.width - 1)
    row = np.clip(np.floor(np.asarray(v, dtype=float) / s + 0.5).astype(int), 0, raster.height - 1)
    return row, col


def in_frame(raster: LabelRaster, u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return (u >= 0) & (v >= 0) & (u < raster.frame_width) & (v < raster.frame_height)


def sample_label(raster: LabelRaster, q) -> LabelClass:
    """Nearest-neighbor label lookup at frame coordinates ``q = (u, v)``."""
    u, v = float(q[0]), float(q[1])
    if not in_frame(raster, u, v):
        raise OutOfFrame(f"({u}, {v}) outside {raster.frame_width}x{raster.frame_height}")
    row, col = _raster_index(raster, u, v)
    return LabelClass(int(raster.data[row, col]))


def sample_labels(raster: LabelRaster, uv) -> np.ndarray:
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    if len(uv) == 0:
        return np.zeros(0, dtype=np.uint8)
    if not np.all(in_frame(raster, uv[:, 0], uv[:, 1])):
        raise OutOfFrame("sample position outside frame extent")
    row, col = _raster_index(raster, uv[:, 0], uv[:, 1])
    return raster.data[row, col]


def vote_label(votes) -> LabelClass:
    """Majority label from ``(keyframe_index, label)`` votes.

    Ties go to the label observed by the most recent keyframe among the tied
    classes.
    """
    votes = list(votes)
    if not votes:
        raise NoObservation("no labeled observation")
    counts = {}
    newest = {}
    for kf, label in votes:
        counts[label] = counts.get(label, 0) + 1
        newest[label] = max(newest.get(label, kf), kf)
    top = max(counts.values())
    tied = [lab for lab, c in counts.items() if c == top]
    return LabelClass(max(tied, key=lambda lab: newest[lab]))


def assign_point_labels(map_state, point_ids, exclude=(), skip_missing=False) -> list:
    """Label points by voting over their observing keyframes that have a raster.

    Keyframes in ``exclude`` do not vote. Mutates ``map_state.points[pid].label``.
    A point without any segmented observer raises NoObservation, or with
    ``skip_missing`` is left unlabeled; the ids of such points are returned.
    """
    point_ids = list(point_ids)
    by_kf: dict = {}
    for pid in point_ids:
        point = map_state.points[pid]
        for kf_index in point.observers:
            kf = map_state.keyframes[kf_index]
            if kf.raster is None or kf_index in exclude:
                continue
            feat = kf.feature_by_id.get(point.track)
            if feat is not None:
                by_kf.setdefault(kf_index, []).append((pid, feat.position))
    votes: dict = {}
    for kf_index, items in by_kf.items():
        raster = map_state.keyframes[kf_index].raster
        labels = sample_labels(raster, [q for _, q in items])
        for (pid, _), lab in zip(items, labels.tolist()):
            votes.setdefault(pid, []).append((kf_index, lab))
    missing = []
    for pid in point_ids:
        if pid not in votes:
            if not skip_missing:
                raise NoObservation(f"point {pid} has no segmented observer")
            missing.append(pid)
            continue
        map_state.points[pid].label = vote_label(votes[pid])
    return missing


@dataclass
class IoUResult:
    per_class: dict = field(default_factory=dict)
    mean: float = float("nan")


def mean_iou(pred: LabelRaster, gt: LabelRaster) -> IoUResult:
    if pred.data.shape != gt.data.shape:
        raise SizeMismatch(f"raster shapes differ: {pred.data.shape} vs {gt.data.shape}")
    out = IoUResult()
    for cls in EVALUATED_CLASSES:
        p = pred.data == cls
        g = gt.data == cls
        union = int(np.count_nonzero(p | g))
        if union == 0:
            continue
        out.per_class[cls] = np.count_nonzero(p & g) / union
    if out.per_class:
        out.mean = float(np.mean(list(out.per_class.values())))
    return out
