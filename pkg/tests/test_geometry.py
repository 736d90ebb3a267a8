import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxcert.errors import DimensionError
from boxcert.geometry import Hyperrectangle, total_volume


def test_constructor_derives_corners():
    box = Hyperrectangle([1.0, -2.0], [0.5, 3.0])
    np.testing.assert_array_equal(box.lo, [0.5, -5.0])
    np.testing.assert_array_equal(box.hi, [1.5, 1.0])
    np.testing.assert_array_equal(box.center, [1.0, -2.0])
    np.testing.assert_array_equal(box.radius, [0.5, 3.0])
    assert box.n == 2


def test_from_bounds_keeps_corners_exact():
    # 0.1 and 0.3 are not exactly representable; the corners must round-trip
    # bit-for-bit even though (lo+hi)/2 +- (hi-lo)/2 would not reproduce them.
    lo = [0.1, -0.3]
    hi = [0.30000000000000004, 0.7]
    box = Hyperrectangle.from_bounds(lo, hi)
    assert box.lo.tolist() == lo
    assert box.hi.tolist() == hi


def test_arrays_are_frozen():
    box = Hyperrectangle.from_bounds([0.0], [1.0])
    for arr in (box.lo, box.hi, box.center, box.radius):
        with pytest.raises(ValueError):
            arr[0] = 5.0


@pytest.mark.parametrize(
    "center,radius",
    [
        ([0.0], [-1.0]),          # negative radius
        ([0.0, 0.0], [1.0]),      # shape mismatch
        ([math.nan], [1.0]),      # non-finite center
        ([0.0], [math.inf]),      # non-finite radius
    ],
)
def test_constructor_rejects_bad_input(center, radius):
    with pytest.raises((DimensionError, ValueError)):
        Hyperrectangle(center, radius)


def test_split_shares_midpoint_bit_for_bit():
    box = Hyperrectangle([2.0], [1.0])
    left, right = box.split(0)
    assert left.lo[0] == 1.0 and left.hi[0] == 2.0
    assert right.lo[0] == 2.0 and right.hi[0] == 3.0
    assert left.hi[0] == right.lo[0]


def test_split_other_axes_untouched():
    box = Hyperrectangle.from_bounds([0.1, -0.7], [0.9, 1.3])
    left, right = box.split(1)
    assert left.lo[0] == box.lo[0] == right.lo[0]
    assert left.hi[0] == box.hi[0] == right.hi[0]


def test_split_bad_axis():
    box = Hyperrectangle([0.0], [1.0])
    with pytest.raises(DimensionError):
        box.split(1)
    with pytest.raises(DimensionError):
        box.split(-1)


def test_split_degenerate_axis_rejected():
    box = Hyperrectangle.from_bounds([0.0, 0.5], [1.0, 0.5])
    with pytest.raises(ValueError):
        box.split(1)


@settings(max_examples=60, deadline=None)
@given(
    lo=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=4),
    widths=st.lists(st.floats(1e-9, 1e5), min_size=1, max_size=4),
    data=st.data(),
)
def test_split_children_tile_parent(lo, widths, data):
    n = min(len(lo), len(widths))
    lo = np.asarray(lo[:n])
    hi = lo + np.asarray(widths[:n])
    box = Hyperrectangle.from_bounds(lo, hi)
    axis = data.draw(st.integers(0, n - 1))
    a, b = box.split(axis)
    # shared face, exact outer corners, no gap and no overlap
    assert a.hi[axis] == b.lo[axis]
    assert a.lo[axis] == box.lo[axis] and b.hi[axis] == box.hi[axis]
    assert box.lo[axis] <= a.hi[axis] <= box.hi[axis]


def test_contains_and_boundary():
    box = Hyperrectangle.from_bounds([0.0, 0.0], [1.0, 2.0])
    assert box.contains([0.0, 2.0])
    assert box.contains([0.5, 1.0])
    assert not box.contains([1.0 + 1e-12, 0.5])


def test_sample_stays_inside(rng):
    box = Hyperrectangle.from_bounds([-0.3, 2.0], [0.1, 2.5])
    pts = box.sample(rng, 500)
    assert pts.shape == (500, 2)
    assert np.all(pts >= box.lo) and np.all(pts <= box.hi)


def test_volume():
    box = Hyperrectangle.from_bounds([0.0, 1.0], [2.0, 4.0])
    assert box.volume() == 6.0
    assert not box.is_degenerate()
    flat = Hyperrectangle.from_bounds([0.0, 1.0], [2.0, 1.0])
    assert flat.volume() == 0.0
    assert flat.is_degenerate()


def test_total_volume_accumulates_exactly():
    box = Hyperrectangle.from_bounds([0.0, 0.0], [1.0, 1.0])
    parts = [box]
    for _ in range(12):
        biggest = max(parts, key=lambda b: b.volume())
        parts.remove(biggest)
        parts.extend(biggest.split(int(np.argmax(biggest.width))))
    assert abs(total_volume(parts) - 1.0) < 1e-12


def test_equality_and_hash():
    a = Hyperrectangle.from_bounds([0.0], [1.0])
    b = Hyperrectangle.from_bounds([0.0], [1.0])
    c = Hyperrectangle.from_bounds([0.0], [2.0])
    assert a == b and hash(a) == hash(b)
    assert a != c
    assert a.key() == b.key() and a.key() != c.key()


def test_width_property():
    box = Hyperrectangle.from_bounds([-1.0, 0.0], [3.0, 0.5])
    np.testing.assert_array_equal(box.width, [4.0, 0.5])
