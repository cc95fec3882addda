"""Curve and shape primitives: Hermite members, rigid surface outlines, predicates.

All routines are unit-agnostic; the pipeline feeds them millimetres.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import GeometryError

ELLIPSE_SEGMENTS = 64
_ARC_TABLE = 4096


class ShapeKind(IntEnum):
    CIRCLE = 1
    ELLIPSE = 2
    RECTANGLE = 3


def rotate(vec, angle):
    c, s = math.cos(angle), math.sin(angle)
    v = np.asarray(vec, dtype=float)
    return np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]], axis=-1)


def cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


# ---------------------------------------------------------------------------
# Hermite members


@dataclass(frozen=True)
class HermiteMember:
    """Cubic Hermite skeleton curve of one member.

    End slopes are measured from the chord direction; both tangent
    magnitudes equal the chord length.
    """

    p0: tuple
    p1: tuple
    tau0: float = 0.0
    tau1: float = 0.0

    @property
    def chord(self) -> np.ndarray:
        return np.asarray(self.p1, float) - np.asarray(self.p0, float)

    @property
    def chord_length(self) -> float:
        return float(np.hypot(*self.chord))

    @property
    def chord_angle(self) -> float:
        c = self.chord
        return math.atan2(c[1], c[0])

    def _tangents(self):
        L = self.chord_length
        if L <= 0.0:
            raise GeometryError("degenerate member: coincident end points")
        a = self.chord_angle
        t0 = L * np.array([math.cos(a + self.tau0), math.sin(a + self.tau0)])
        t1 = L * np.array([math.cos(a + self.tau1), math.sin(a + self.tau1)])
        return t0, t1

    def point(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        t0, t1 = self._tangents()
        p0, p1 = np.asarray(self.p0, float), np.asarray(self.p1, float)
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * p0 + h10 * t0 + h01 * p1 + h11 * t1

    def derivative(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        t0, t1 = self._tangents()
        p0, p1 = np.asarray(self.p0, float), np.asarray(self.p1, float)
        return ((6 * s**2 - 6 * s) * p0 + (3 * s**2 - 4 * s + 1) * t0
                + (-6 * s**2 + 6 * s) * p1 + (3 * s**2 - 2 * s) * t1)

    def departure_angle(self, end: int) -> float:
        """Direction (rad) in which the member leaves its end vertex ``end`` (0 or 1)."""
        if end == 0:
            return self.chord_angle + self.tau0
        return self.chord_angle + self.tau1 + math.pi

    def arc_parameters(self, n_el: int) -> np.ndarray:
        """Curve parameters splitting the member into ``n_el`` equal arc lengths."""
        if n_el < 1:
            raise GeometryError("n_el must be >= 1")
        s = np.linspace(0.0, 1.0, _ARC_TABLE + 1)
        speed = np.linalg.norm(self.derivative(s), axis=-1)
        # Simpson on pairs of intervals, trapezoid for cumulative table
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(s))])
        targets = np.linspace(0.0, cum[-1], n_el + 1)
        params = np.interp(targets, cum, s)
        params[0], params[-1] = 0.0, 1.0
        return params


def hermite_polyline(member: HermiteMember, n_el: int) -> np.ndarray:
    """Open polyline of ``n_el + 1`` points at equal arc-length spacing."""
    pts, _ = hermite_frames(member, n_el)
    return pts


def hermite_frames(member: HermiteMember, n_el: int):
    """Polyline points and unit tangents at equal arc-length stations."""
    params = member.arc_parameters(n_el)
    pts = member.point(params)
    pts[0] = np.asarray(member.p0, float)
    pts[-1] = np.asarray(member.p1, float)
    tan = member.derivative(params)
    tan /= np.linalg.norm(tan, axis=-1, keepdims=True)
    return pts, tan


# ---------------------------------------------------------------------------
# External surfaces


@dataclass(frozen=True)
class SurfaceShape:
    kind: ShapeKind
    center: tuple
    bound_radius: float
    half_a: float  # circle radius, ellipse semi-axis a, rectangle half-length
    half_b: float
    theta: float
    boundary: np.ndarray = field(repr=False, compare=False)
    scale: float = 1.0  # rectangle rescale factor actually applied

    def contains(self, points) -> np.ndarray:
        return shape_contains_point(self, points)

    @property
    def area(self) -> float:
        if self.kind == ShapeKind.RECTANGLE:
            return 4.0 * self.half_a * self.half_b
        return math.pi * self.half_a * self.half_b


def rectangle_scale(bound_radius: float, f1: float, f2: float) -> float:
    """Shrink factor keeping rectangle corners within the bounding circle (capped at 1)."""
    half_diag = math.hypot(f1 * bound_radius, f2 * bound_radius)
    if half_diag <= 0.0:
        return 1.0
    return min(1.0, bound_radius / half_diag)


def realize_surface(kind, center, bound_radius, f1, f2, theta=0.0, max_edge=None) -> SurfaceShape:
    kind = ShapeKind(int(kind))
    cx, cy = float(center[0]), float(center[1])
    R = float(bound_radius)
    scale = 1.0
    if kind == ShapeKind.CIRCLE:
        a = b = 0.5 * (f1 * R + f2 * R)
        theta = 0.0
    elif kind == ShapeKind.ELLIPSE:
        a, b = f1 * R, f2 * R
    else:
        scale = rectangle_scale(R, f1, f2)
        a, b = f1 * R * scale, f2 * R * scale

    if kind == ShapeKind.RECTANGLE:
        corners = np.array([[a, -b], [a, b], [-a, b], [-a, -b]])
        pts = []
        for k in range(4):
            c0, c1 = corners[k - 1], corners[k]
            # start at the middle of the right edge, walk CCW
            n = 1
            if max_edge is not None and max_edge > 0:
                n = max(1, int(math.ceil(np.linalg.norm(c1 - c0) / max_edge)))
            for i in range(n):
                pts.append(c0 + (c1 - c0) * i / n)
        local = np.array(pts)
    else:
        ang = 2.0 * math.pi * np.arange(ELLIPSE_SEGMENTS) / ELLIPSE_SEGMENTS
        local = np.column_stack([a * np.cos(ang), b * np.sin(ang)])
    boundary = rotate(local, theta) + np.array([cx, cy])
    return SurfaceShape(kind, (cx, cy), R, float(a), float(b), float(theta), boundary, scale)


def shape_contains_point(shape: SurfaceShape, points, tol: float = 1e-9) -> np.ndarray:
    """Analytic, orientation-aware containment; boundary counts as inside."""
    p = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(shape.center)
    local = rotate(p, -shape.theta)
    x, y = local[:, 0], local[:, 1]
    if shape.kind == ShapeKind.RECTANGLE:
        inside = (np.abs(x) <= shape.half_a + tol) & (np.abs(y) <= shape.half_b + tol)
    else:
        a, b = shape.half_a, shape.half_b
        inside = (x / a) ** 2 + (y / b) ** 2 <= 1.0 + tol
    return inside


# ---------------------------------------------------------------------------
# Segment predicates


def segments_intersect_many(a0, a1, b0, b1, tol: float = 1e-9) -> np.ndarray:
    """Broadcasting segment-pair intersection test.

    True when the closed segments share a point that is not merely a common
    end point: proper crossings, T-touches and collinear overlaps longer
    than ``tol`` all count.
    """
    a0, a1, b0, b1 = (np.asarray(x, dtype=float) for x in (a0, a1, b0, b1))
    da = a1 - a0
    db = b1 - b0
    la = np.maximum(np.linalg.norm(da, axis=-1), 1e-300)
    lb = np.maximum(np.linalg.norm(db, axis=-1), 1e-300)

    # signed distances of each end point from the other segment's line
    sa0 = cross2(db, a0 - b0) / lb
    sa1 = cross2(db, a1 - b0) / lb
    sb0 = cross2(da, b0 - a0) / la
    sb1 = cross2(da, b1 - a0) / la
    # projections along the other segment
    ta0 = np.einsum("...i,...i->...", a0 - b0, db) / lb
    ta1 = np.einsum("...i,...i->...", a1 - b0, db) / lb
    tb0 = np.einsum("...i,...i->...", b0 - a0, da) / la
    tb1 = np.einsum("...i,...i->...", b1 - a0, da) / la

    def opposite(s, t):
        return ((s > tol) & (t < -tol)) | ((s < -tol) & (t > tol))

    proper = opposite(sa0, sa1) & opposite(sb0, sb1)

    def coincide(p, q):
        return np.linalg.norm(p - q, axis=-1) <= tol

    c00, c01 = coincide(a0, b0), coincide(a0, b1)
    c10, c11 = coincide(a1, b0), coincide(a1, b1)

    def on_seg(s, t, length):
        return (np.abs(s) <= tol) & (t >= -tol) & (t <= length + tol)

    touch = ((on_seg(sa0, ta0, lb) & ~(c00 | c01))
             | (on_seg(sa1, ta1, lb) & ~(c10 | c11))
             | (on_seg(sb0, tb0, la) & ~(c00 | c10))
             | (on_seg(sb1, tb1, la) & ~(c01 | c11)))

    collinear = (np.abs(sa0) <= tol) & (np.abs(sa1) <= tol) & (np.abs(sb0) <= tol) & (np.abs(sb1) <= tol)
    lo = np.maximum(0.0, np.minimum(tb0, tb1))
    hi = np.minimum(la, np.maximum(tb0, tb1))
    overlap = (hi - lo) > tol
    return np.where(collinear, overlap, proper | touch)


def segments_intersect(s1, s2, tol: float = 1e-9) -> bool:
    (p0, p1), (q0, q1) = s1, s2
    return bool(segments_intersect_many(p0, p1, q0, q1, tol))


def polyline_segments(points, closed=False):
    pts = np.asarray(points, dtype=float)
    if closed:
        return pts, np.roll(pts, -1, axis=0)
    return pts[:-1], pts[1:]


def polylines_intersect(p, q, closed_p=False, closed_q=False, tol=1e-9) -> bool:
    """Any segment of polyline ``p`` intersecting any segment of ``q``."""
    pa, pb = polyline_segments(p, closed_p)
    qa, qb = polyline_segments(q, closed_q)
    lo_p = np.minimum(pa, pb).min(axis=0) - tol
    hi_p = np.maximum(pa, pb).max(axis=0) + tol
    lo_q = np.minimum(qa, qb).min(axis=0)
    hi_q = np.maximum(qa, qb).max(axis=0)
    if np.any(hi_p < lo_q) or np.any(hi_q < lo_p):
        return False
    hit = segments_intersect_many(pa[:, None], pb[:, None], qa[None], qb[None], tol)
    return bool(hit.any())


# ---------------------------------------------------------------------------
# Polygons


def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def points_in_polygon(points, poly) -> np.ndarray:
    """Even-odd containment of many points in one closed polygon."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(poly, dtype=float)
    w = np.roll(v, -1, axis=0)
    x = pts[:, 0][:, None]
    y = pts[:, 1][:, None]
    straddle = (v[None, :, 1] > y) != (w[None, :, 1] > y)
    dy = w[:, 1] - v[:, 1]
    dy = np.where(dy == 0.0, 1e-300, dy)
    xcross = v[None, :, 0] + (y - v[None, :, 1]) * (w[None, :, 0] - v[None, :, 0]) / dy[None]
    hits = straddle & (x < xcross)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


def closest_point_on_polygon(points, poly):
    """Nearest boundary point of a closed polygon for each query point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(poly, dtype=float)
    b = np.roll(a, -1, axis=0)
    d = b - a
    ll = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    t = np.einsum("pkj,kj->pk", pts[:, None, :] - a[None], d) / ll
    t = np.clip(t, 0.0, 1.0)
    proj = a[None] + t[..., None] * d[None]
    dist = np.linalg.norm(proj - pts[:, None, :], axis=-1)
    k = np.argmin(dist, axis=1)
    return proj[np.arange(len(pts)), k]


def polygon_is_simple(poly, tol=1e-12) -> bool:
    """True when no two non-adjacent edges of a closed polygon intersect."""
    p = np.asarray(poly, dtype=float)
    n = len(p)
    if n < 3:
        return False
    a, b = p, np.roll(p, -1, axis=0)
    hit = segments_intersect_many(a[:, None], b[:, None], a[None], b[None], tol)
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    adjacent = (gap <= 1) | (gap == n - 1)
    return not bool((hit & ~adjacent).any())


def convex_hull(points) -> np.ndarray:
    """Monotone-chain convex hull, counter-clockwise, no repeated first point."""
    pts = sorted(map(tuple, np.asarray(points, dtype=float)))
    pts = list(dict.fromkeys(pts))
    if len(pts) <= 2:
        return np.array(pts)

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and cross2(np.subtract(out[-1], out[-2]), np.subtract(p, out[-2])) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return np.array(lower[:-1] + upper[:-1])
