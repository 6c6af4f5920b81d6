import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hangerlab import _kernels_py, kernels

try:
    from hangerlab import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def winding_number(x, y, poly):
    """Independent oracle: signed-angle winding number."""
    total = 0.0
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i][0] - x, poly[i][1] - y
        bx, by = poly[(i + 1) % n][0] - x, poly[(i + 1) % n][1] - y
        total += math.atan2(ax * by - ay * bx, ax * bx + ay * by)
    return round(total / (2 * math.pi))


def seg_dist(x, y, s):
    x1, y1, x2, y2 = s
    dx, dy = x2 - x1, y2 - y1
    l2 = dx * dx + dy * dy
    t = 0.0 if l2 == 0 else min(max(((x - x1) * dx + (y - y1) * dy) / l2, 0.0), 1.0)
    return math.hypot(x - (x1 + t * dx), y - (y1 + t * dy))


def star(n, rng):
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    rad = rng.uniform(0.2, 1.0, n)
    return np.c_[rad * np.cos(ang), rad * np.sin(ang)]


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("seed", range(5))
def test_pip_matches_winding_oracle(seed):
    rng = np.random.default_rng(seed)
    poly = star(9, rng)
    px, py = rng.uniform(-1.1, 1.1, 400), rng.uniform(-1.1, 1.1, 400)
    got = _kernels_py.points_in_polygon(px, py, poly)
    for x, y, g in zip(px, py, got):
        assert g == (winding_number(x, y, poly) != 0)


@pytest.mark.parametrize("seed", range(3))
def test_near_segments_matches_distance_oracle(seed):
    rng = np.random.default_rng(seed)
    segs = rng.uniform(-1, 1, (3, 4))
    px, py = rng.uniform(-1, 1, 300), rng.uniform(-1, 1, 300)
    got = _kernels_py.points_near_segments(px, py, segs, 0.1)
    for x, y, g in zip(px, py, got):
        d = min(seg_dist(x, y, s) for s in segs)
        if abs(d - 0.1) > 1e-12:
            assert g == (d <= 0.1)


@needs_ext
@given(st.integers(0, 2**31), st.integers(3, 12), st.floats(0.0, 0.3))
@settings(max_examples=100, deadline=None)
def test_backends_bit_identical(seed, n, radius):
    rng = np.random.default_rng(seed)
    poly = star(n, rng)
    segs = rng.uniform(-1, 1, (3, 4))
    px, py = rng.uniform(-1.2, 1.2, 257), rng.uniform(-1.2, 1.2, 257)
    # include vertex-aligned points, where the crossing rule matters
    px[:n], py[:n] = poly[:, 0], poly[:, 1]
    np.testing.assert_array_equal(_kernels_py.points_in_polygon(px, py, poly),
                                  _ckernels.points_in_polygon(px, py, poly))
    np.testing.assert_array_equal(_kernels_py.points_near_segments(px, py, segs, radius),
                                  _ckernels.points_near_segments(px, py, segs, radius))


def test_degenerate_segment_is_a_disc():
    m = kernels.points_near_segments([0.0, 0.05, 0.2], [0.0, 0.0, 0.0], [[0, 0, 0, 0]], 0.1)
    np.testing.assert_array_equal(m, [1, 1, 0])
