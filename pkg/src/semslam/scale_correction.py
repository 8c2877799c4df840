"""Scale-drift correction from the ratio of real to virtual camera height."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .errors import NonPositiveHeight
from .geometry import Pose
from .mapstate import MapState

SCALE_LOWER = 0.001
SCALE_UPPER = 0.2


class ScaleReason(enum.Enum):
    APPLIED = "applied"
    TOO_SMALL = "too_small"
    TOO_LARGE = "too_large"


@dataclass(frozen=True)
class ScaleDecision:
    factor: float
    applied: bool
    reason: ScaleReason


def compute_scale(h_real: float, h_virtual: float) -> float:
    if not (h_real > 0 and h_virtual > 0):
        raise NonPositiveHeight(f"heights must be positive (real={h_real}, virtual={h_virtual})")
    return h_real / h_virtual


def _dec(x) -> Decimal:
    return Decimal(repr(float(x)))


def should_correct(s: float, lower: float = SCALE_LOWER, upper: float = SCALE_UPPER) -> ScaleDecision:
    """Gate a correction on ``lower < |s - 1| < upper`` (both strict).

    The comparison runs in decimal on the shortest repr of each float, so a
    factor written as 1.2 or 0.8 sits exactly on the bound instead of a binary
    rounding step inside it.
    """
    dev = abs(_dec(s) - 1)
    if dev <= _dec(lower):
        return ScaleDecision(s, False, ScaleReason.TOO_SMALL)
    if dev >= _dec(upper):
        return ScaleDecision(s, False, ScaleReason.TOO_LARGE)
    return ScaleDecision(s, True, ScaleReason.APPLIED)


def scaling_set(map_state: MapState, current_kf: int):
    """Keyframes and points rescaled by a correction at ``current_kf``."""
    kf = map_state.keyframe(current_kf)
    kfs = (current_kf,) + tuple(kf.connected)
    return kfs, map_state.points_of(kfs)


def apply_scale(map_state: MapState, current_kf: int, s: float) -> MapState:
    """Scale the connected neighborhood about the current camera center, in place.

    Connected keyframe centers and every point observed by the current or a
    connected keyframe move to ``c + s * (x - c)``; rotations, labels and
    connectivity are untouched. Returns ``map_state`` for chaining.
    """
    kf = map_state.keyframe(current_kf)
    if s == 1.0:
        return map_state
    pivot = kf.center
    for j in kf.connected:
        other = map_state.keyframe(j)
        R = other.pose.rotation
        new_center = pivot + s * (other.center - pivot)
        other.pose = Pose(R, -R @ new_center)
    _, pids = scaling_set(map_state, current_kf)
    for pid in pids:
        p = map_state.points[pid]
        p.position = pivot + s * (p.position - pivot)
    return map_state


def scale_about(points, pivot, s) -> np.ndarray:
    pivot = np.asarray(pivot, dtype=float)
    return pivot + s * (np.asarray(points, dtype=float) - pivot)
