import numpy as np
import pytest
from hypothesis import given, strategies as st

from semslam.errors import NonPositiveHeight, UnknownKeyframe
from semslam.geometry import Pose, rot_y
from semslam.ground_plane import RansacConfig, fit_plane_ransac, virtual_height
from semslam.mapstate import MapState
from semslam.scale_correction import (ScaleReason, apply_scale, compute_scale, scaling_set,
                                      should_correct)


def test_compute_scale():
    assert compute_scale(1.7, 1.7) == 1.0
    assert compute_scale(1.7, 1.6) == pytest.approx(1.0625, abs=1e-15)
    with pytest.raises(NonPositiveHeight):
        compute_scale(1.7, 0.0)
    with pytest.raises(NonPositiveHeight):
        compute_scale(0.0, 1.0)


def test_should_correct_examples():
    assert should_correct(1.0).reason is ScaleReason.TOO_SMALL
    assert should_correct(1.1).applied
    d = should_correct(0.75)
    assert not d.applied and d.reason is ScaleReason.TOO_LARGE


@given(st.floats(0.01, 3.0))
def test_should_correct_matches_predicate(s):
    assert should_correct(s).applied == (0.001 < abs(s - 1) < 0.2)


def small_map(centers, point_obs):
    m = MapState()
    for c in centers:
        m.add_keyframe(len(m.keyframes), Pose.from_center(rot_y(0.1 * len(m.keyframes)), c), [])
    for pos, obs in point_obs:
        m.add_point(len(m.points), pos, obs)
    return m


def test_apply_scale_examples():
    m = small_map([[0, 0, 0]], [([2.0, 0, 0], [0])])
    apply_scale(m, 0, 0.5)
    assert np.allclose(m.points[0].position, [1, 0, 0])

    m = small_map([[3, 0, 0], [1, 0, 0]], [])
    m.keyframes[1].connected = (0,)
    apply_scale(m, 1, 1.1)
    assert np.allclose(m.keyframes[0].center, [3.2, 0, 0], atol=1e-12)
    assert np.allclose(m.keyframes[1].center, [1, 0, 0], atol=1e-12)


def test_identity_scale_is_bitwise_noop():
    m = small_map([[3, 0, 1], [1, 0.5, 0]], [([2.0, 1, 4], [0, 1])])
    m.keyframes[1].connected = (0,)
    before = m.copy()
    apply_scale(m, 1, 1.0)
    assert m.keyframes[0].pose == before.keyframes[0].pose
    assert np.array_equal(m.points[0].position, before.points[0].position)


def test_unknown_keyframe():
    with pytest.raises(UnknownKeyframe):
        apply_scale(MapState(), 3, 1.05)


def test_scope_excludes_unconnected():
    m = small_map([[0, 0, 0], [5, 0, 0], [10, 0, 0]],
                  [([1.0, 1, 1], [0]), ([6.0, 1, 1], [1]), ([11.0, 1, 1], [2])])
    m.keyframes[2].connected = (1,)
    kfs, pids = scaling_set(m, 2)
    assert kfs == (2, 1) and pids == [1, 2]
    apply_scale(m, 2, 1.1)
    assert np.array_equal(m.points[0].position, [1.0, 1, 1])
    assert np.array_equal(m.keyframes[0].center, [0.0, 0, 0])
    assert np.allclose(m.points[1].position, [10 - 1.1 * 4, 1.1, 1.1])


@given(st.floats(0.5, 1.5), st.floats(0.5, 1.5), st.integers(0, 1000))
def test_composition_and_invariants(s1, s2, seed):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-10, 10, (4, 3))
    pts = [(rng.uniform(-10, 10, 3), [int(rng.integers(0, 4)), 3]) for _ in range(10)]
    a = small_map(centers, pts)
    a.keyframes[3].connected = (0, 1, 2)
    b = a.copy()
    rot_before = [kf.pose.rotation.copy() for kf in a.keyframes]
    apply_scale(a, 3, s1)
    apply_scale(a, 3, s2)
    apply_scale(b, 3, s1 * s2)
    for ka, kb, R in zip(a.keyframes, b.keyframes, rot_before):
        assert np.allclose(ka.center, kb.center, atol=1e-9)
        assert np.array_equal(ka.pose.rotation, R)
    for pid in a.points:
        assert np.allclose(a.points[pid].position, b.points[pid].position, atol=1e-9)
    assert np.allclose(a.keyframes[3].center, centers[3], atol=1e-12)


def test_correction_then_refit_gives_unit_scale():
    # road points and camera in a map shrunk by 1/1.08 about the origin
    rng = np.random.default_rng(4)
    k = 1 / 1.08
    road = np.column_stack([rng.uniform(-6, 6, 80), np.full(80, 1.7), rng.uniform(3, 30, 80)]) * k
    m = small_map([[0, 0, -5.0 * k], [0, 0, 0]], [(p, [0, 1]) for p in road])
    m.keyframes[1].connected = (0,)
    plane, _ = fit_plane_ransac(road, RansacConfig(inlier_threshold=0.05))
    s = compute_scale(1.7, virtual_height(plane, m.keyframes[1].center))
    assert s == pytest.approx(1.08, abs=1e-9) and should_correct(s).applied
    apply_scale(m, 1, s)
    moved = np.array([m.points[p].position for p in sorted(m.points)])
    plane2, _ = fit_plane_ransac(moved, RansacConfig(inlier_threshold=0.05))
    assert compute_scale(1.7, virtual_height(plane2, m.keyframes[1].center)) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("s,applied", [(1.2, False), (0.8, False), (0.999, False), (1.001, False),
                                       (0.9989, True), (1.0011, True), (0.8001, True)])
def test_gate_bounds_are_decimal_exact(s, applied):
    assert should_correct(s).applied is applied
