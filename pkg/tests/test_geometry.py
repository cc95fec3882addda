import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccmsynth.geometry import (HermiteMember, ShapeKind, hermite_frames, hermite_polyline, polygon_is_simple,
                               realize_surface, rectangle_scale, segments_intersect, shape_contains_point)
from ccmsynth.oracles import point_in_polygon_raycast, segments_cross_exact


def test_zero_slopes_give_uniform_straight_chord():
    pts = hermite_polyline(HermiteMember((0, 0), (150, 0)), 20)
    np.testing.assert_allclose(pts[:, 1], 0, atol=1e-12)
    np.testing.assert_allclose(np.diff(pts[:, 0]), 7.5, rtol=1e-9)


def test_end_tangents_follow_slopes():
    m = HermiteMember((0, 0), (150, 0), 0.5, -0.5)
    pts, tan = hermite_frames(m, 20)
    assert len(pts) == 21
    assert math.atan2(tan[0][1], tan[0][0]) == pytest.approx(0.5, abs=1e-9)
    assert math.atan2(tan[-1][1], tan[-1][0]) == pytest.approx(-0.5, abs=1e-9)
    assert m.departure_angle(0) == pytest.approx(0.5)
    assert m.departure_angle(1) == pytest.approx(math.pi - 0.5)


def test_equal_arc_length_stations():
    m = HermiteMember((0, 0), (150, 40), 0.5, 0.5)
    pts = hermite_polyline(m, 20)
    # dense sampling as the arc-length oracle
    s = np.linspace(0, 1, 200001)
    dense = m.point(s)
    cum = np.concatenate([[0], np.cumsum(np.linalg.norm(np.diff(dense, axis=0), axis=1))])
    targets = np.linspace(0, cum[-1], 21)
    ref = np.column_stack([np.interp(targets, cum, dense[:, 0]), np.interp(targets, cum, dense[:, 1])])
    np.testing.assert_allclose(pts, ref, atol=1e-3)
    ch = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    assert ch.max() / ch.min() <= 1.005


def test_circle_radius_is_mean_of_scaled_factors():
    s = realize_surface(ShapeKind.CIRCLE, (0, 0), 5.0, 0.4, 0.6)
    assert s.half_a == pytest.approx(2.5, abs=1e-12)
    assert s.half_b == pytest.approx(2.5, abs=1e-12)


def test_rectangle_rescale_boundary_case_and_shrink():
    assert rectangle_scale(5.0, 3 / 5, 4 / 5) == pytest.approx(1.0, abs=1e-12)
    f = rectangle_scale(5.0, 4 / 5, 4 / 5)
    assert f == pytest.approx(5 / math.sqrt(32), abs=1e-12)
    s = realize_surface(ShapeKind.RECTANGLE, (0, 0), 5.0, 0.8, 0.8)
    assert math.hypot(s.half_a, s.half_b) == pytest.approx(5.0, abs=1e-9)


@pytest.mark.parametrize("s1,s2,expected", [
    (((0, 0), (1, 1)), ((0, 1), (1, 0)), True),
    (((0, 0), (1, 0)), ((1, 0), (2, 0)), False),
    (((0, 0), (2, 0)), ((1, 0), (3, 0)), True),
    (((0, 0), (2, 0)), ((1, 0), (1, 5)), True),
    (((0, 0), (1, 0)), ((0, 1), (1, 1)), False),
])
def test_segment_predicate_examples(s1, s2, expected):
    assert segments_intersect(s1, s2) is expected or bool(segments_intersect(s1, s2)) == expected
    assert segments_cross_exact(*s1, *s2) == expected


def test_segment_predicate_matches_rational_oracle_on_small_grid():
    rng = np.random.default_rng(3)
    for _ in range(3000):
        a = rng.integers(0, 4, (4, 2))
        s1, s2 = (tuple(a[0]), tuple(a[1])), (tuple(a[2]), tuple(a[3]))
        if s1[0] == s1[1] or s2[0] == s2[1]:
            continue
        assert bool(segments_intersect(s1, s2)) == segments_cross_exact(*s1, *s2), (s1, s2)


def test_containment_examples():
    c = realize_surface(ShapeKind.CIRCLE, (0, 0), 2.5, 1.0, 1.0)
    assert shape_contains_point(c, (0, 0))[0]
    assert shape_contains_point(c, (2.5, 0))[0]
    r = realize_surface(ShapeKind.RECTANGLE, (0, 0), math.hypot(2, 1), 2 / math.hypot(2, 1),
                        1 / math.hypot(2, 1), math.pi / 4)
    p = (2.0, 0.5)
    assert bool(shape_contains_point(r, p)[0]) == point_in_polygon_raycast(p, r.boundary)


@given(st.sampled_from([2, 3]), st.floats(0.1, 1.0), st.floats(0.1, 1.0), st.floats(0, math.pi),
       st.floats(-8, 8), st.floats(-8, 8))
def test_containment_matches_raycast(kind, f1, f2, theta, px, py):
    s = realize_surface(kind, (0.5, -0.3), 5.0, f1, f2, theta)
    inside = bool(shape_contains_point(s, (px, py), tol=0.0)[0])
    # the ellipse outline is a 64-gon, so only compare away from the boundary band
    if kind == ShapeKind.ELLIPSE:
        local = np.array([px - 0.5, py + 0.3])
        c, sn = math.cos(-theta), math.sin(-theta)
        x, y = c * local[0] - sn * local[1], sn * local[0] + c * local[1]
        rho = (x / s.half_a) ** 2 + (y / s.half_b) ** 2
        if abs(rho - 1) < 0.01:
            return
    else:
        d = min(abs(abs(v) - h) for v, h in zip(_local(s, px, py), (s.half_a, s.half_b)))
        if d < 1e-9:
            return
    assert inside == point_in_polygon_raycast((px, py), s.boundary)


def _local(s, px, py):
    c, sn = math.cos(-s.theta), math.sin(-s.theta)
    x, y = px - s.center[0], py - s.center[1]
    return c * x - sn * y, sn * x + c * y


@given(st.integers(1, 3), st.floats(0.1, 1.0), st.floats(0.1, 1.0), st.floats(0, math.pi))
def test_surface_outlines_are_simple_and_ccw(kind, f1, f2, theta):
    s = realize_surface(kind, (0, 0), 3.0, f1, f2, theta)
    assert polygon_is_simple(s.boundary)
    x, y = s.boundary[:, 0], s.boundary[:, 1]
    assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0
