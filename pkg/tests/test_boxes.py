"""Box arithmetic: containment, IoU, enlargement, pixel clamping."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from earlybeam.boxes import BBox, Keypoint, enlarge, inflate, iou
from earlybeam.errors import DataError

coords = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@st.composite
def bboxes(draw):
    x0, x1 = sorted((draw(coords), draw(coords)))
    y0, y1 = sorted((draw(coords), draw(coords)))
    return BBox(x0, y0, x1, y1)


def test_bbox_rejects_inverted():
    with pytest.raises(DataError):
        BBox(5, 0, 4, 10)
    with pytest.raises(DataError):
        BBox(0, 5, 10, 4)


def test_bbox_derived_quantities():
    b = BBox(2, 3, 6, 11)
    assert b.width == 4 and b.height == 8
    assert b.area == 32
    assert b.center == (4, 7)


def test_contains_is_inclusive_on_edges():
    b = BBox(1, 1, 4, 4)
    assert b.contains(1, 1) and b.contains(4, 4) and b.contains(2.5, 3)
    assert not b.contains(0.999, 2) and not b.contains(2, 4.001)


def test_pixel_bounds_clamps_and_rejects_empty():
    b = BBox(-3.2, 2.7, 5.9, 99.0)
    assert b.pixel_bounds(10, 8) == (0, 2, 5, 7)
    outside = BBox(20, 0, 25, 5)
    with pytest.raises(DataError):
        outside.pixel_bounds(10, 8)


def test_from_center_clamps_negative_extent():
    b = BBox.from_center(10, 20, -4, 6)
    assert b.width == 0 and b.height == 6
    assert b.center == (10, 20)


def test_iou_known_values():
    a = BBox(0, 0, 9, 9)
    assert iou(a, a) == 1.0
    assert iou(a, BBox(5, 0, 14, 9)) == pytest.approx(36 / (81 + 81 - 36))
    assert iou(a, BBox(20, 20, 30, 30)) == 0.0
    # degenerate equal boxes count as a perfect match
    pt = BBox(3, 3, 3, 3)
    assert iou(pt, pt) == 1.0
    assert iou(pt, BBox(4, 4, 4, 4)) == 0.0


@given(bboxes(), bboxes())
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)


def test_enlarge_scales_about_center_and_clips():
    b = BBox(10, 10, 20, 20)
    e = enlarge(b, 2.0, width=100, height=100)
    assert (e.x_min, e.y_min, e.x_max, e.y_max) == (5, 5, 25, 25)
    edge = enlarge(BBox(0, 0, 10, 10), 3.0, width=100, height=100)
    assert edge.x_min == 0 and edge.y_min == 0
    with pytest.raises(DataError):
        enlarge(b, 0.5, width=100, height=100)


def test_inflate_grows_each_side_by_fraction():
    b = BBox(10, 20, 30, 60)
    f = inflate(b, 0.1)
    assert f.x_min == pytest.approx(8) and f.x_max == pytest.approx(32)
    assert f.y_min == pytest.approx(16) and f.y_max == pytest.approx(64)


def test_keypoint_kind_validated():
    Keypoint(3.0, 4.0, vehicle_id=1, kind="direct")
    Keypoint(3.0, 4.0, vehicle_id=2, kind="indirect")
    with pytest.raises(DataError):
        Keypoint(3.0, 4.0, kind="sideways")
