import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bgshift.errors import EmptyMask
from bgshift.geometry import BBox, Mask, candidate_grid, intersects, iou, mask_to_bbox

from oracles import pixel_iou, scan_bbox

boxes = st.builds(
    BBox,
    st.integers(0, 40), st.integers(0, 40), st.integers(1, 30), st.integers(1, 30),
)


def test_iou_identity_and_disjoint():
    assert iou(BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)) == 1.0
    assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 5, 5)) == 0.0


def test_iou_half_shift_matches_pixel_count():
    a, b = BBox(0, 0, 10, 10), BBox(5, 0, 10, 10)
    assert iou(a, b) == pytest.approx(pixel_iou((0, 0, 10, 10), (5, 0, 10, 10)))
    assert iou(a, b) == pytest.approx(1 / 3)


@settings(max_examples=300, deadline=None)
@given(boxes, boxes)
def test_iou_matches_raster_oracle(a, b):
    expected = pixel_iou(tuple(a.as_list()), tuple(b.as_list()))
    assert iou(a, b) == pytest.approx(expected, abs=1e-12)


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0
    assert iou(a, a) == 1.0


@given(boxes, boxes)
def test_intersects_iff_positive_iou(a, b):
    assert intersects(a, b) == (iou(a, b) > 0)


def test_intersects_edges_and_nesting():
    assert not intersects(BBox(0, 0, 10, 10), BBox(10, 0, 10, 10))
    assert intersects(BBox(0, 0, 10, 10), BBox(2, 2, 3, 3))


def test_bbox_rejects_degenerate():
    with pytest.raises(ValueError):
        BBox(0, 0, 0, 5)


def test_mask_to_bbox_simple_cases():
    assert mask_to_bbox(Mask(np.ones((4, 4), bool))) == BBox(0, 0, 4, 4)
    bits = np.zeros((6, 6), bool)
    bits[3, 2] = True
    assert mask_to_bbox(Mask(bits)) == BBox(2, 3, 1, 1)
    with pytest.raises(EmptyMask):
        mask_to_bbox(Mask(np.zeros((3, 3), bool)))


def test_mask_to_bbox_random_against_scan(rng):
    for _ in range(50):
        bits = rng.random((rng.integers(1, 30), rng.integers(1, 30))) < 0.05
        if not bits.any():
            continue
        b = mask_to_bbox(Mask(bits))
        assert tuple(b.as_list()) == scan_bbox(bits)
        # every set bit inside, and each edge touches a set bit
        ys, xs = np.nonzero(bits)
        assert all(b.contains_point(x, y) for x, y in zip(xs, ys))
        assert xs.min() == b.x and ys.min() == b.y
        assert xs.max() == b.x2 - 1 and ys.max() == b.y2 - 1


def test_grid_100_is_ten_by_ten():
    g = candidate_grid(100, 100, 100)
    assert g.count == 100
    xs = sorted({x for x, _ in g})
    ys = sorted({y for _, y in g})
    assert xs == list(range(5, 100, 10))
    assert ys == list(range(5, 100, 10))


def test_grid_single_point_centered():
    assert candidate_grid(100, 100, 1).positions == ((50, 50),)


def test_grid_odd_size_in_bounds_and_distinct():
    g = candidate_grid(257, 123, 100)
    assert len(g) == 100
    assert len(set(g.positions)) == 100
    assert all(0 <= x < 257 and 0 <= y < 123 for x, y in g)


@pytest.mark.parametrize("n", [2, 3, 5, 7, 10, 37, 99, 101])
def test_grid_exact_count(n):
    g = candidate_grid(200, 150, n)
    assert len(g) == n
    assert g == candidate_grid(200, 150, n)
