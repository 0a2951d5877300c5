import numpy as np
import pytest

from assurance.intervals import (
    EmbeddingState,
    IntervalVector,
    contains,
    corner_mask,
    corners,
    rect_of,
)
from core.exceptions import (
    CornerLimitExc,
    DimensionMismatchExc,
    EmbeddingOrderExc,
    IntervalOrderExc,
    UnboundedBoxExc,
)


@pytest.mark.parametrize(
    "point, expected",
    [
        ([0.5, 1.5], True),
        ([0.0, 1.0], True),
        ([1.0, 2.0], True),
        ([-0.1, 1.5], False),
        ([0.5, 2.0000001], False),
    ],
)
def test_contains(point, expected):
    box = IntervalVector([0.0, 1.0], [1.0, 2.0])
    assert contains(box, point) is expected
    assert box.contains(point) is expected


def test_contains_dimension_mismatch():
    box = IntervalVector([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(DimensionMismatchExc):
        contains(box, [0.5])


def test_lower_above_upper_rejected():
    with pytest.raises(IntervalOrderExc, match="coordinate 1"):
        IntervalVector([0.0, 3.0], [1.0, 2.0])


def test_nan_endpoints_rejected():
    with pytest.raises(IntervalOrderExc):
        IntervalVector([np.nan], [1.0])


def test_bounds_are_read_only():
    box = IntervalVector([0.0], [1.0])
    with pytest.raises(ValueError):
        box.lower[0] = 5.0


class TestCorners:

    def test_count_and_endpoints(self):
        box = IntervalVector([0.0, -1.0, 2.0], [1.0, 1.0, 3.0])
        pts = corners(box)
        assert pts.shape == (8, 3)
        np.testing.assert_array_equal(pts[0], box.lower)
        np.testing.assert_array_equal(pts[-1], box.upper)

    def test_binary_counting_order(self):
        box = IntervalVector([0.0, 0.0], [1.0, 1.0])
        np.testing.assert_array_equal(corners(box), [[0, 0], [1, 0], [0, 1], [1, 1]])

    def test_every_corner_inside_box(self):
        box = IntervalVector([-2.0, 0.5, 1.0, 0.0], [-1.0, 0.75, 4.0, 0.0])
        assert all(box.contains(c) for c in corners(box))

    def test_degenerate_box_keeps_duplicates(self):
        box = IntervalVector.degenerate([0.3, -0.7, 1.1])
        pts = corners(box)
        assert pts.shape == (8, 3)
        assert np.unique(pts, axis=0).shape == (1, 3)

    def test_mask_shape(self):
        mask = corner_mask(5)
        assert mask.shape == (32, 5)
        assert not mask[0].any()
        assert mask[-1].all()

    def test_limit(self):
        box = IntervalVector(np.zeros(17), np.ones(17))
        with pytest.raises(CornerLimitExc):
            corners(box)

    def test_unbounded_rejected(self):
        with pytest.raises(UnboundedBoxExc):
            corners(IntervalVector.unbounded(2))


class TestIntervalVector:

    def test_symmetric(self):
        box = IntervalVector.symmetric([0.1, 0.2], center=[1.0, 0.0])
        np.testing.assert_allclose(box.lower, [0.9, -0.2])
        np.testing.assert_allclose(box.upper, [1.1, 0.2])
        np.testing.assert_allclose(box.center, [1.0, 0.0])
        np.testing.assert_allclose(box.width, [0.2, 0.4])

    def test_inflate_and_subset(self):
        box = IntervalVector([0.0, 0.0], [1.0, 1.0])
        assert box.is_subset(box.inflate(0.5))
        assert not box.inflate(0.5).is_subset(box)

    def test_sample_within_box(self):
        box = IntervalVector([0.0, -3.0], [1.0, -2.0])
        pts = box.sample(np.random.default_rng(4), 500)
        assert pts.shape == (500, 2)
        assert np.all(pts >= box.lower) and np.all(pts <= box.upper)

    def test_sample_unbounded_rejected(self):
        with pytest.raises(UnboundedBoxExc):
            IntervalVector.unbounded(3).sample(np.random.default_rng(0), 1)

    def test_is_degenerate(self):
        assert IntervalVector.degenerate([1.0, 2.0]).is_degenerate()
        assert not IntervalVector([1.0, 2.0], [1.0, 2.5]).is_degenerate()


class TestEmbeddingState:

    def test_rect_of(self):
        a = EmbeddingState([0.0, 1.0], [2.0, 1.0])
        box = rect_of(a)
        np.testing.assert_array_equal(box.lower, [0.0, 1.0])
        np.testing.assert_array_equal(box.upper, [2.0, 1.0])

    def test_rect_of_rejects_disorder(self):
        a = EmbeddingState([3.0, 1.0], [2.0, 1.0])
        with pytest.raises(EmbeddingOrderExc) as info:
            rect_of(a)
        assert info.value.index == 0

    def test_vector_layout(self):
        a = EmbeddingState.from_vector([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_array_equal(a.under, [1.0, 2.0])
        np.testing.assert_array_equal(a.over, [3.0, 4.0])
        np.testing.assert_array_equal(a.as_vector(), [1.0, 2.0, 3.0, 4.0])
        assert a.ordered()

    def test_of_box(self):
        a = EmbeddingState.of_box(IntervalVector([0.0, -1.0], [1.0, 2.0]))
        np.testing.assert_array_equal(a.as_vector(), [0.0, -1.0, 1.0, 2.0])
        assert rect_of(a).is_subset(IntervalVector([0.0, -1.0], [1.0, 2.0]))

    def test_odd_vector_rejected(self):
        with pytest.raises(DimensionMismatchExc):
            EmbeddingState.from_vector([1.0, 2.0, 3.0])
