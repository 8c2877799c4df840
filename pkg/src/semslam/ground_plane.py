"""Ground-plane estimation from road-labeled map points.

A plane is ``<n, x> + offset = 0`` with unit ``n``. The camera height above it
is the absolute point-plane distance of the camera center.
"""
from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .errors import BadConfig, NoConsensus, TooFewPoints

BOOTSTRAP_MIN_POINTS = 50


@dataclass(frozen=True, eq=False)
class PlaneParams:
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.array(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def canonical(self) -> "PlaneParams":
        n, d = self.normal, self.offset
        flip = d < 0
        if d == 0:
            nz = n[np.nonzero(n)[0][0]]
            flip = nz < 0
        if flip:
            return PlaneParams(-n, -d if d != 0 else 0.0)
        return self

    def residuals(self, points) -> np.ndarray:
        return np.abs(np.asarray(points, dtype=float) @ self.normal + self.offset)

    def __eq__(self, other):
        if not isinstance(other, PlaneParams):
            return NotImplemented
        return bool(np.array_equal(self.normal, other.normal) and self.offset == other.offset)

    __hash__ = None

    def __repr__(self):
        return f"PlaneParams(normal={self.normal.tolist()}, offset={self.offset!r})"


@dataclass(frozen=True)
class RansacConfig:
    # threshold is in map units, which are meters only after scale correction
    iterations: int = 200
    inlier_threshold: float = 0.05
    min_inliers: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1 or not self.inlier_threshold > 0 or self.min_inliers < 0:
            raise BadConfig(f"invalid RANSAC config {self}")


def _plane_through(p0, p1, p2):
    (ax, ay, az), (bx, by, bz) = (p1 - p0).tolist(), (p2 - p0).tolist()
    n = np.array([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx])
    norm = math.sqrt(float(n @ n))
    scale = math.sqrt((ax * ax + ay * ay + az * az) * (bx * bx + by * by + bz * bz))
    if scale == 0 or norm <= 1e-12 * scale:
        return None
    n = n / norm
    return n, -float(n @ p0)


def ransac_consensus(points, cfg: RansacConfig):
    """Best-consensus candidate plane from minimal 3-point samples.

    Returns ``(candidate, inlier_mask)``; ``inlier_mask`` marks the points
    within ``cfg.inlier_threshold`` of the candidate.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n_pts = len(pts)
    if n_pts < 3:
        raise TooFewPoints(f"need >= 3 points, got {n_pts}")
    rng = np.random.default_rng(cfg.seed)
    best = None
    best_mask = None
    best_count = -1
    done = draws = 0
    # collinear draws are redrawn without spending the iteration budget
    while done < cfg.iterations and draws < 10 * cfg.iterations:
        draws += 1
        idx = rng.choice(n_pts, size=3, replace=False)
        cand = _plane_through(pts[idx[0]], pts[idx[1]], pts[idx[2]])
        if cand is None:
            continue
        done += 1
        n, d = cand
        mask = np.abs(pts @ n + d) <= cfg.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best, best_mask, best_count = cand, mask, count
    if best is None:
        raise NoConsensus("every sample was degenerate")
    if best_count < cfg.min_inliers:
        raise NoConsensus(f"best consensus {best_count} < {cfg.min_inliers}")
    return PlaneParams(best[0], best[1]), best_mask


def refit_plane(points) -> PlaneParams:
    """Orthogonal least-squares plane: centroid plus smallest principal axis."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise TooFewPoints(f"need >= 3 points, got {len(pts)}")
    centroid = pts.mean(axis=0)
    _, _, Vt = np.linalg.svd(pts - centroid, full_matrices=False)
    n = Vt[-1] / np.linalg.norm(Vt[-1])
    return PlaneParams(n, -float(n @ centroid)).canonical()


def fit_plane_ransac(points, cfg: RansacConfig = RansacConfig()):
    """Robust plane fit. Returns ``(plane, inlier_indices)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    _, mask = ransac_consensus(pts, cfg)
    inliers = np.flatnonzero(mask)
    return refit_plane(pts[inliers]), inliers


def virtual_height(plane: PlaneParams, center) -> float:
    return float(abs(plane.normal @ np.asarray(center, dtype=float) + plane.offset))


def bootstrap_height(center, road_points, min_points: int = BOOTSTRAP_MIN_POINTS) -> float:
    """Mean absolute y-difference between the camera center and road points.

    Used before any correction, while the map scale is still arbitrary and a
    metric RANSAC threshold would be meaningless.
    """
    pts = np.asarray(road_points, dtype=float).reshape(-1, 3)
    if len(pts) < min_points:
        raise TooFewPoints(f"bootstrap needs >= {min_points} road points, got {len(pts)}")
    return float(np.mean(np.abs(float(center[1]) - pts[:, 1])))
