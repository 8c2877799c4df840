from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from semslam.errors import IllegalClassByte, MalformedHeader, NoObservation, OutOfFrame, SizeMismatch
from semslam.geometry import Pose
from semslam.mapstate import Feature, MapState
from semslam.semantic_labels import (LabelClass, LabelRaster, assign_point_labels, load_label_raster,
                                     mean_iou, sample_label, sample_labels, vote_label,
                                     write_label_raster)


def test_class_bytes():
    assert [int(c) for c in (LabelClass.OTHER, LabelClass.ROAD, LabelClass.MOVABLE, LabelClass.BACKGROUND)] == [0, 1, 2, 3]


def test_load_small_raster(tmp_path):
    p = tmp_path / "r.pgm"
    p.write_bytes(b"P5\n# comment\n4 2\n255\n" + bytes([1] * 8))
    r = load_label_raster(p)
    assert (r.width, r.height) == (4, 2) and np.all(r.data == LabelClass.ROAD)


def test_load_errors(tmp_path):
    p = tmp_path / "r.pgm"
    p.write_bytes(b"P5\n4 2\n255\n" + bytes([1] * 7 + [7]))
    with pytest.raises(IllegalClassByte):
        load_label_raster(p)
    p.write_bytes(b"P5\n4 2\n255\n" + bytes([1] * 5))
    with pytest.raises(SizeMismatch):
        load_label_raster(p)
    p.write_bytes(b"P6\n4 2\n255\n" + bytes(24))
    with pytest.raises(MalformedHeader):
        load_label_raster(p)
    p.write_bytes(b"P5\n4")
    with pytest.raises(MalformedHeader):
        load_label_raster(p)
    p.write_bytes(b"P5\n4 2\n255\n" + bytes(8))
    with pytest.raises(SizeMismatch):
        load_label_raster(p, scale=2, frame_size=(640, 480))


@given(hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2, max_side=20), elements=st.integers(0, 3)))
def test_pgm_round_trip(tmp_path_factory, data):
    h, w = data.shape
    p = tmp_path_factory.mktemp("pgm") / "x.pgm"
    write_label_raster(LabelRaster(w, h, data), p)
    assert load_label_raster(p) == LabelRaster(w, h, data)


def test_sample_label_examples():
    data = np.zeros((4, 4), dtype=np.uint8)
    data[0, 0] = LabelClass.ROAD
    data[2, 2] = LabelClass.MOVABLE
    assert sample_label(LabelRaster(4, 4, data), (0, 0)) is LabelClass.ROAD
    # scale 2: (3,3) -> floor(1.5 + 0.5) = 2
    assert sample_label(LabelRaster(4, 4, data, Fraction(2)), (3, 3)) is LabelClass.MOVABLE
    with pytest.raises(OutOfFrame):
        sample_label(LabelRaster(4, 4, data), (-1, 0))


@given(hnp.arrays(np.uint8, (6, 7), elements=st.integers(0, 3)))
def test_unit_scale_sampling_is_indexing(data):
    r = LabelRaster(7, 6, data)
    vv, uu = np.mgrid[0:6, 0:7]
    got = sample_labels(r, np.column_stack([uu.ravel(), vv.ravel()]))
    assert np.array_equal(got, data.ravel())


def test_vote_examples():
    R, B = LabelClass.ROAD, LabelClass.BACKGROUND
    assert vote_label([(0, R), (1, R)]) is R
    assert vote_label([(0, R), (1, B), (2, R)]) is R
    assert vote_label([(0, R), (1, B)]) is B
    assert vote_label([(1, R), (0, B)]) is R
    with pytest.raises(NoObservation):
        vote_label([])


def test_assign_point_labels():
    m = MapState()
    road = LabelRaster(4, 4, np.full((4, 4), 1, dtype=np.uint8))
    bg = LabelRaster(4, 4, np.full((4, 4), 3, dtype=np.uint8))
    for r in (road, bg, None):
        kf = m.add_keyframe(len(m.keyframes), Pose.identity(), [Feature(7, (1.0, 1.0))])
        kf.raster = r
    p = m.add_point(7, [0, 0, 1], [0, 1, 2])
    assign_point_labels(m, [p.id])
    assert p.label is LabelClass.BACKGROUND  # tie, newest segmented keyframe wins
    assign_point_labels(m, [p.id], exclude=(1,))
    assert p.label is LabelClass.ROAD
    q = m.add_point(8, [0, 0, 1], [2])
    with pytest.raises(NoObservation):
        assign_point_labels(m, [q.id])
    assert assign_point_labels(m, [q.id], skip_missing=True) == [q.id]


def test_iou_examples():
    a = np.zeros((4, 4), dtype=np.uint8)
    a[:, :2] = LabelClass.ROAD
    b = np.zeros((4, 4), dtype=np.uint8)
    b[:, 1:3] = LabelClass.ROAD
    res = mean_iou(LabelRaster(4, 4, a), LabelRaster(4, 4, b))
    assert res.per_class == {LabelClass.ROAD: 1 / 3}
    assert res.mean == 1 / 3
    same = mean_iou(LabelRaster(4, 4, a), LabelRaster(4, 4, a))
    assert same.mean == 1.0
    c = np.full((4, 4), LabelClass.MOVABLE, dtype=np.uint8)
    d = np.full((4, 4), LabelClass.BACKGROUND, dtype=np.uint8)
    assert mean_iou(LabelRaster(4, 4, c), LabelRaster(4, 4, d)).mean == 0.0
    with pytest.raises(SizeMismatch):
        mean_iou(LabelRaster(4, 4, a), LabelRaster(2, 8, a.reshape(8, 2)))


@given(hnp.arrays(np.uint8, (5, 5), elements=st.integers(0, 3)),
       hnp.arrays(np.uint8, (5, 5), elements=st.integers(0, 3)))
def test_iou_symmetric_and_bounded(a, b):
    x = mean_iou(LabelRaster(5, 5, a), LabelRaster(5, 5, b))
    y = mean_iou(LabelRaster(5, 5, b), LabelRaster(5, 5, a))
    assert x.per_class == y.per_class
    assert all(0.0 <= v <= 1.0 for v in x.per_class.values())
