"""Pin-hole camera model, poses and two-view triangulation.

Convention: right-handed, the camera looks along +z and y points down, so the
road lies at positive y below a level camera. A pose maps world points into
the camera frame, ``x_cam = R @ x_world + t``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadConfig, BehindCamera, DegenerateBaseline, NonPositiveDepth

ORTHO_TOL = 1e-9
BASELINE_EPS = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    focal_length: float
    principal_x: float
    principal_y: float

    def __post_init__(self):
        if not (self.focal_length > 0 and self.principal_x > 0 and self.principal_y > 0):
            raise BadConfig(f"invalid intrinsics {self}")

    @property
    def K(self) -> np.ndarray:
        f, px, py = self.focal_length, self.principal_x, self.principal_y
        return np.array([[f, 0.0, px], [0.0, f, py], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Pose:
    """World-to-camera rigid transform ``[R | t]``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not is_rotation(R):
            raise ValueError("rotation is not orthonormal with det +1")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_center(cls, rotation, center) -> "Pose":
        R = np.asarray(rotation, dtype=float)
        return cls(R, -R @ np.asarray(center, dtype=float))

    @property
    def matrix(self) -> np.ndarray:
        """3x4 ``[R | t]``."""
        return np.hstack([self.rotation, self.translation[:, None]])

    @property
    def center(self) -> np.ndarray:
        return camera_center(self)

    def transform(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(np.array_equal(self.rotation, other.rotation)
                    and np.array_equal(self.translation, other.translation))

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def __repr__(self):
        return f"Pose(R={self.rotation.tolist()}, t={self.translation.tolist()})"


def is_rotation(R, tol: float = ORTHO_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    if np.max(np.abs(R.T @ R - np.eye(3))) >= tol:
        return False
    return np.linalg.det(R) > 0


def nearest_rotation(M) -> np.ndarray:
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def camera_center(pose: Pose) -> np.ndarray:
    """c = -R^-1 t (R^-1 = R^T for a rotation)."""
    return -pose.rotation.T @ pose.translation


def project(intr: CameraIntrinsics, pose: Pose, p) -> np.ndarray:
    xc = pose.rotation @ np.asarray(p, dtype=float) + pose.translation
    if not xc[2] > 0:
        raise NonPositiveDepth(f"point depth {xc[2]} <= 0")
    return np.array([intr.focal_length * xc[0] / xc[2] + intr.principal_x,
                     intr.focal_length * xc[1] / xc[2] + intr.principal_y])


def project_many(intr: CameraIntrinsics, pose: Pose, points):
    """Vectorized projection. Returns ``(uv, depth)``; rows with depth <= 0
    carry meaningless uv and must be masked by the caller."""
    xc = pose.transform(np.atleast_2d(points))
    z = xc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = np.column_stack([intr.focal_length * xc[:, 0] / z + intr.principal_x,
                              intr.focal_length * xc[:, 1] / z + intr.principal_y])
    return uv, z


def back_project(intr: CameraIntrinsics, q, depth: float) -> np.ndarray:
    """Camera-frame point at ``depth`` along the ray through pixel ``q``."""
    if not depth > 0:
        raise NonPositiveDepth(f"depth {depth} <= 0")
    u, v = float(q[0]), float(q[1])
    return np.array([(u - intr.principal_x) * depth / intr.focal_length,
                     (v - intr.principal_y) * depth / intr.focal_length,
                     float(depth)])


def _normalized(intr: CameraIntrinsics, q) -> np.ndarray:
    q = np.atleast_2d(np.asarray(q, dtype=float))
    return np.column_stack([(q[:, 0] - intr.principal_x) / intr.focal_length,
                            (q[:, 1] - intr.principal_y) / intr.focal_length])


def triangulate_many(intr: CameraIntrinsics, pose_a: Pose, pose_b: Pose, q_a, q_b):
    """Batched linear (DLT) triangulation on normalized image coordinates.

    Returns ``(points, ok)`` where ``ok`` flags rows that are finite and in
    front of both cameras. Raises DegenerateBaseline for coincident centers.
    """
    if np.linalg.norm(camera_center(pose_a) - camera_center(pose_b)) < BASELINE_EPS:
        raise DegenerateBaseline("camera centers coincide")
    na = _normalized(intr, q_a)
    nb = _normalized(intr, q_b)
    Pa, Pb = pose_a.matrix, pose_b.matrix
    A = np.empty((len(na), 4, 4))
    A[:, 0] = na[:, 0, None] * Pa[2] - Pa[0]
    A[:, 1] = na[:, 1, None] * Pa[2] - Pa[1]
    A[:, 2] = nb[:, 0, None] * Pb[2] - Pb[0]
    A[:, 3] = nb[:, 1, None] * Pb[2] - Pb[1]
    # row scaling only conditions the system, the null vector is unchanged
    A /= np.linalg.norm(A, axis=2, keepdims=True)
    _, _, Vt = np.linalg.svd(A)
    X = Vt[:, -1, :]
    w = X[:, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        pts = X[:, :3] / w[:, None]
    finite = np.all(np.isfinite(pts), axis=1) & (np.abs(w) > 1e-12)
    pts = np.where(finite[:, None], pts, np.nan)
    za = pts @ pose_a.rotation[2] + pose_a.translation[2]
    zb = pts @ pose_b.rotation[2] + pose_b.translation[2]
    ok = finite & (za > 0) & (zb > 0)
    return pts, ok


def triangulate(intr: CameraIntrinsics, pose_a: Pose, pose_b: Pose, q_a, q_b) -> np.ndarray:
    pts, ok = triangulate_many(intr, pose_a, pose_b, [q_a], [q_b])
    if not ok[0]:
        if not np.all(np.isfinite(pts[0])):
            raise DegenerateBaseline("rays are parallel")
        raise BehindCamera("triangulated point is not in front of both cameras")
    return pts[0]


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
