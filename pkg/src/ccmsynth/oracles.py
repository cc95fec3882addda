"""Independent reference implementations for the test suite.

Nothing here imports from the rest of the package: every oracle is written
from scratch against numpy/scipy so that agreement with the production code
is evidence rather than tautology.
"""
from __future__ import annotations

import math
from fractions import Fraction as Fr

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.optimize import brentq


class OracleError(Exception):
    pass


# ---------------------------------------------------------------------------
# Planar faces


def faces_bruteforce(points, edges) -> list:
    """Faces of a straight-line planar embedding by half-edge next-pointer walking.

    ``points`` maps vertex id -> (x, y); ``edges`` is a list of (edge id, a, b).
    Each face is returned as a frozenset of directed half-edges (edge id, u, v)
    with the face on the left, so bounded faces run counter-clockwise.
    """
    pts = {k: np.asarray(p, dtype=float) for k, p in dict(points).items()}
    out_edges: dict = {}
    for eid, a, b in edges:
        assert a != b, "self loops are not planar straight-line edges"
        out_edges.setdefault(a, []).append((eid, b))
        out_edges.setdefault(b, []).append((eid, a))

    def angle(u, v):
        d = pts[v] - pts[u]
        return math.atan2(d[1], d[0])

    # around each vertex, outgoing half-edges sorted counter-clockwise
    ring = {u: sorted(nb, key=lambda e: (angle(u, e[1]), e[0])) for u, nb in out_edges.items()}

    def nxt(h):
        eid, u, v = h
        around = ring[v]
        i = next(k for k, (e, w) in enumerate(around) if e == eid and w == u)
        # the face on the left of u->v continues along the edge clockwise-next from the twin
        e2, w2 = around[(i - 1) % len(around)]
        return (e2, v, w2)

    halfedges = [(e, a, b) for e, a, b in edges] + [(e, b, a) for e, a, b in edges]
    seen = set()
    faces = []
    for h in halfedges:
        if h in seen:
            continue
        cyc = []
        g = h
        while g not in seen:
            seen.add(g)
            cyc.append(g)
            g = nxt(g)
        assert g == h, "half-edge walk did not close"
        faces.append(frozenset(cyc))
    return faces


def face_area(points, face) -> float:
    """Signed area of a face given as directed half-edges (positive for bounded faces)."""
    pts = {k: np.asarray(p, dtype=float) for k, p in dict(points).items()}
    return 0.5 * sum(pts[u][0] * pts[v][1] - pts[v][0] * pts[u][1] for _, u, v in face)


def euler_faces(n_vertices: int, n_edges: int, n_components: int = 1) -> int:
    return n_edges - n_vertices + n_components + 1


# ---------------------------------------------------------------------------
# Linear plane-stress finite elements


_GP = np.array([-1.0, 1.0]) / math.sqrt(3.0)


def _plane_stress(E, nu):
    return E / (1 - nu * nu) * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, (1 - nu) / 2]])


def _dN(xi, eta):
    return 0.25 * np.array([[-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
                            [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)]])


def _bmat(dNdx):
    B = np.zeros((3, 8))
    B[0, 0::2] = dNdx[0]
    B[1, 1::2] = dNdx[1]
    B[2, 0::2] = dNdx[1]
    B[2, 1::2] = dNdx[0]
    return B


def _element_k(xy, C, t, incompatible):
    K = np.zeros((8, 8))
    Kua = np.zeros((8, 4))
    Kaa = np.zeros((4, 4))
    J0 = _dN(0.0, 0.0) @ xy
    detJ0 = np.linalg.det(J0)
    J0inv = np.linalg.inv(J0)
    for xi in _GP:
        for eta in _GP:
            J = _dN(xi, eta) @ xy
            dJ = np.linalg.det(J)
            if dJ <= 0:
                raise OracleError("inverted element")
            B = _bmat(np.linalg.solve(J, _dN(xi, eta)))
            K += B.T @ C @ B * dJ * t
            if incompatible:
                # Wilson bubbles (1 - xi^2), (1 - eta^2) with Taylor's constant-Jacobian correction
                dG = np.array([[-2 * xi, 0.0], [0.0, -2 * eta]])   # rows: d/dxi, d/deta
                dGdx = J0inv @ dG * (detJ0 / dJ)
                G = np.zeros((3, 4))
                G[0, 0:2] = dGdx[0]
                G[1, 2:4] = dGdx[1]
                G[2, 0:2] = dGdx[1]
                G[2, 2:4] = dGdx[0]
                Kua += B.T @ C @ G * dJ * t
                Kaa += G.T @ C @ G * dJ * t
    if incompatible:
        K -= Kua @ np.linalg.solve(Kaa, Kua.T)
    return K


def linear_fe_reference(nodes, elements, E: float, nu: float, thickness: float, fixed_dofs, loads,
                        incompatible: bool = False) -> np.ndarray:
    """Small-strain plane-stress solve; returns the nodal displacement vector.

    ``loads`` maps dof -> force.  ``incompatible`` switches from the plain
    bilinear element to the Wilson-Taylor incompatible-mode element.
    """
    x = np.asarray(nodes, dtype=float)
    els = np.asarray(elements, dtype=int)
    C = _plane_stress(E, nu)
    ndof = 2 * len(x)
    rows, cols, vals = [], [], []
    for el in els:
        k = _element_k(x[el], C, thickness, incompatible)
        dofs = np.ravel(np.column_stack([2 * el, 2 * el + 1]))
        rows.append(np.repeat(dofs, 8))
        cols.append(np.tile(dofs, 8))
        vals.append(k.ravel())
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ndof, ndof))
    f = np.zeros(ndof)
    for d, val in dict(loads).items():
        f[d] += val
    fixed = np.zeros(ndof, dtype=bool)
    fixed[list(fixed_dofs)] = True
    free = np.flatnonzero(~fixed)
    Kff = K[free][:, free].tocsc()
    try:
        lu = spla.splu(Kff)
    except RuntimeError as exc:
        raise OracleError("singular stiffness (insufficient supports?)") from exc
    u = np.zeros(ndof)
    u[free] = lu.solve(f[free])
    if not np.all(np.isfinite(u)):
        raise OracleError("singular stiffness (insufficient supports?)")
    return u


def euler_bernoulli_tip(P: float, L: float, E: float, I: float) -> float:
    return P * L ** 3 / (3.0 * E * I)


# ---------------------------------------------------------------------------
# Large-deflection elastica


def elastica_tip(load_param: float, angle: float = math.pi / 2) -> tuple:
    """Tip position (x/L, y/L) of an inextensible cantilever under a dead tip load.

    ``load_param`` is P L^2 / EI, ``angle`` the load direction from the
    undeformed axis.  Solves theta'' = -k sin(angle - theta) by shooting on the
    root curvature.
    """
    k = float(load_param)
    if k == 0.0:
        return 1.0, 0.0

    def rhs(s, y):
        th, dth, _, _ = y
        return [dth, -k * math.sin(angle - th), math.cos(th), math.sin(th)]

    def shoot(c0):
        sol = solve_ivp(rhs, (0.0, 1.0), [0.0, c0, 0.0, 0.0], rtol=1e-11, atol=1e-12)
        return sol.y[:, -1]

    # the root moment equals the load times the lever arm, bounded by k
    c0 = brentq(lambda c: shoot(c)[1], 0.0, k * 1.0000001 + 1e-12, xtol=1e-14)
    end = shoot(c0)
    return float(end[2]), float(end[3])


# ---------------------------------------------------------------------------
# Fourier descriptors by quadrature


def fsd_quadrature(polygon, n: int) -> tuple:
    """Fourier coefficients of phi(t) - t computed edge by edge in closed form.

    phi is the cumulative turning angle relative to the first edge, as a
    function of normalised arc length t in [0, 2 pi).
    """
    q = np.asarray(polygon, dtype=float)
    d = np.roll(q, -1, axis=0) - q
    ln = np.hypot(d[:, 0], d[:, 1])
    keep = ln > 0
    d, ln = d[keep], ln[keep]
    ang = np.arctan2(d[:, 1], d[:, 0])
    turn = (np.diff(ang) + math.pi) % (2 * math.pi) - math.pi
    phi = np.concatenate([[0.0], np.cumsum(turn)])
    t = 2 * math.pi * np.concatenate([[0.0], np.cumsum(ln)]) / ln.sum()
    a = np.zeros(n)
    b = np.zeros(n)
    for k in range(1, n + 1):
        # integral of phi_j over [t_j, t_j+1] against cos/sin, minus the integral of t
        ic = (np.sin(k * t[1:]) - np.sin(k * t[:-1])) / k
        is_ = -(np.cos(k * t[1:]) - np.cos(k * t[:-1])) / k
        ac = float(phi @ ic)
        bs = float(phi @ is_)
        # integral_0^{2pi} t cos(kt) dt = 0, integral_0^{2pi} t sin(kt) dt = -2 pi / k
        a[k - 1] = ac / math.pi
        b[k - 1] = (bs + 2 * math.pi / k) / math.pi
    return a, b


# ---------------------------------------------------------------------------
# Analytic contact geometry


def circle_projection(point, center, radius: float) -> tuple:
    """Closest point on a circle, outward normal there, and signed gap."""
    p = np.asarray(point, dtype=float)
    c = np.asarray(center, dtype=float)
    r = p - c
    dist = float(np.hypot(*r))
    if dist == 0.0:
        raise OracleError("point at the circle centre has no unique projection")
    n = r / dist
    return c + radius * n, n, dist - radius


def point_in_polygon_raycast(point, polygon) -> bool:
    """Even-odd rule with a horizontal ray to +x."""
    x, y = float(point[0]), float(point[1])
    q = np.asarray(polygon, dtype=float)
    inside = False
    for (x0, y0), (x1, y1) in zip(q, np.roll(q, -1, axis=0)):
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if xc > x:
                inside = not inside
    return inside


def segments_cross_exact(p0, p1, q0, q1) -> bool:
    """Exact intersection test on rational coordinates, endpoint-only contact excluded.

    Collinear overlaps of positive length count as intersecting.
    """
    p0, p1, q0, q1 = ([Fr(float(c)) for c in pt] for pt in (p0, p1, q0, q1))

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2, o3, o4 = orient(p0, p1, q0), orient(p0, p1, q1), orient(q0, q1, p0), orient(q0, q1, p1)
    if o1 == o2 == o3 == o4 == 0:
        # collinear: project on the dominant axis and measure the overlap
        ax = 0 if p0[0] != p1[0] or q0[0] != q1[0] else 1
        lo = max(min(p0[ax], p1[ax]), min(q0[ax], q1[ax]))
        hi = min(max(p0[ax], p1[ax]), max(q0[ax], q1[ax]))
        return hi > lo
    shared = {tuple(p0), tuple(p1)} & {tuple(q0), tuple(q1)}
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    touches = [(o1 == 0 and on(p0, p1, q0), tuple(q0)), (o2 == 0 and on(p0, p1, q1), tuple(q1)),
               (o3 == 0 and on(q0, q1, p0), tuple(p0)), (o4 == 0 and on(q0, q1, p1), tuple(p1))]
    return any(t and pt not in shared for t, pt in touches)


def segment_projection(point, a, b) -> tuple:
    """Closest point on segment ab with parameter in [0, 1]."""
    p, a, b = (np.asarray(x, dtype=float) for x in (point, a, b))
    ab = b - a
    s = float(np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0))
    return a + s * ab, s


__all__ = ["OracleError", "faces_bruteforce", "face_area", "euler_faces", "linear_fe_reference",
           "euler_bernoulli_tip", "elastica_tip", "fsd_quadrature", "circle_projection", "segment_projection",
           "point_in_polygon_raycast", "segments_cross_exact"]
