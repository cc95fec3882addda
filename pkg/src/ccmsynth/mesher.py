"""Skeleton-to-quad fleshing: member patches, circular junctions, surface pruning, wear."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import CandidateTopology, connected_to
from .errors import MeshError, WearError
from .geometry import (closest_point_on_polygon, convex_hull, hermite_frames, points_in_polygon,
                       segments_intersect_many, shape_contains_point)

log = logging.getLogger(__name__)

OCTAGON = math.sqrt(2.0 - math.sqrt(2.0))
COMPRESSION = 0.75
_GAUSS = np.array([-1.0, 1.0]) / math.sqrt(3.0)


def junction_radius(widths) -> float:
    widths = list(widths)
    if not widths:
        raise MeshError("junction without incident members")
    return 0.85 * max(widths) / OCTAGON


# ---------------------------------------------------------------------------
# Element helpers


def jacobian_dets(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Bilinear-map Jacobian determinants at the 2x2 Gauss points, shape (E, 4)."""
    x = nodes[elements]  # (E, 4, 2)
    out = np.empty((len(elements), 4))
    k = 0
    for xi in _GAUSS:
        for eta in _GAUSS:
            dN_dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
            dN_deta = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
            a = np.einsum("n,enk->ek", dN_dxi, x)
            b = np.einsum("n,enk->ek", dN_deta, x)
            out[:, k] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
            k += 1
    return out


def element_areas(nodes, elements) -> np.ndarray:
    x = nodes[elements]
    xs, ys = x[..., 0], x[..., 1]
    return 0.5 * np.sum(xs * np.roll(ys, -1, axis=1) - np.roll(xs, -1, axis=1) * ys, axis=1)


def side_nodes(elements, e: int, d: int):
    """Start and end node of side ``d`` (1..4) of element ``e``, counter-clockwise."""
    return int(elements[e, d - 1]), int(elements[e, d % 4])


# ---------------------------------------------------------------------------
# Data types


@dataclass
class MemberPatch:
    id: int
    v0: int
    v1: int
    width: float
    rows: np.ndarray       # original w-set indices kept, ascending
    elements: np.ndarray   # (n_rows, n_ew) element ids; [w-set, l-set]
    nodes: np.ndarray      # (n_rows + 1, n_ew + 1) node ids
    free0: bool            # p0 end is a free (junction-less) end
    free1: bool


@dataclass
class Junction:
    vertex: int
    center: np.ndarray
    radius: float
    center_node: int
    periph: np.ndarray     # 8 * n_ew node ids, counter-clockwise from angle -pi/8
    nodes: np.ndarray      # all (2 n_ew + 1)^2 node ids
    elements: np.ndarray   # 4 n_ew^2 element ids
    segments: dict         # member id -> arc segment index 0..7
    compression: float = COMPRESSION

    def segment_nodes(self, k: int, n_ew: int) -> np.ndarray:
        idx = [(k * n_ew + j) % len(self.periph) for j in range(n_ew + 1)]
        return self.periph[idx]


@dataclass
class QuadMesh:
    nodes: np.ndarray              # (N, 2) mm
    elements: np.ndarray           # (E, 4) counter-clockwise
    owner: np.ndarray              # (E,) member id, or -(vertex + 1) for junction elements
    patches: dict                  # member id -> MemberPatch
    junctions: dict                # vertex id -> Junction
    thickness: float               # mm
    n_el: int
    n_ew: int
    vertex_nodes: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def side(self, e: int, d: int):
        return side_nodes(self.elements, e, d)

    def boundary_sides(self) -> list:
        """(element, side) pairs with exactly one adjacent element, in element order."""
        count: dict = {}
        for e in range(len(self.elements)):
            for d in range(1, 5):
                a, b = side_nodes(self.elements, e, d)
                key = (min(a, b), max(a, b))
                count[key] = count.get(key, 0) + 1
        out = []
        for e in range(len(self.elements)):
            for d in range(1, 5):
                a, b = side_nodes(self.elements, e, d)
                if count[(min(a, b), max(a, b))] == 1:
                    out.append((e, d))
        return out

    def mean_edge(self) -> float:
        x = self.nodes[self.elements]
        return float(np.linalg.norm(x - np.roll(x, -1, axis=1), axis=-1).mean())

    def with_nodes(self, nodes) -> "QuadMesh":
        return replace(self, nodes=np.asarray(nodes, dtype=float))


# ---------------------------------------------------------------------------
# Member patches


def flesh_member(polyline, tangents, width: float, n_ew: int, member=None) -> np.ndarray:
    """Node grid (n_el + 1, n_ew + 1, 2); column 0 lies on the right (-normal) side."""
    pts = np.asarray(polyline, dtype=float)
    tan = np.asarray(tangents, dtype=float)
    if width <= 0 or n_ew < 1:
        raise MeshError("width must be positive and n_ew >= 1", member)
    normal = np.column_stack([-tan[:, 1], tan[:, 0]])
    off = -0.5 * width + width * np.arange(n_ew + 1) / n_ew
    grid = pts[:, None, :] + off[None, :, None] * normal[:, None, :]
    n_el = len(pts) - 1
    els = patch_elements(n_el, n_ew)
    if np.any(jacobian_dets(grid.reshape(-1, 2), els) <= 0):
        raise MeshError(f"member {member}: offset exceeds local curvature radius", member)
    return grid


def patch_elements(n_el: int, n_ew: int) -> np.ndarray:
    """Local connectivity of a row-major (i, j) patch with node index i*(n_ew+1)+j."""
    i, j = np.meshgrid(np.arange(n_el), np.arange(n_ew), indexing="ij")
    i, j = i.ravel(), j.ravel()
    c = n_ew + 1
    return np.column_stack([i * c + j, (i + 1) * c + j, (i + 1) * c + j + 1, i * c + j + 1])


# ---------------------------------------------------------------------------
# Junction grid


def concentric_disc(a, b):
    """Shirley-Chiu concentric map of [-1, 1]^2 onto the unit disc."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r = np.where(np.abs(a) > np.abs(b), a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(np.abs(a) > np.abs(b), 0.25 * math.pi * b / a, 0.5 * math.pi - 0.25 * math.pi * a / b)
    phi = np.where(r == 0, 0.0, phi)
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def junction_template(n_ew: int):
    """Unit-radius junction: node coords, element connectivity, peripheral and centre indices."""
    n = 2 * n_ew
    s = np.linspace(-1.0, 1.0, n + 1)
    a, b = np.meshgrid(s, s, indexing="xy")   # node (p, q) at index q*(n+1)+p
    pts = concentric_disc(a.ravel(), b.ravel())
    rot = -math.pi / 8
    c, si = math.cos(rot), math.sin(rot)
    pts = pts @ np.array([[c, si], [-si, c]])
    q, p = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    q, p = q.ravel(), p.ravel()
    w = n + 1
    els = np.column_stack([q * w + p, q * w + p + 1, (q + 1) * w + p + 1, (q + 1) * w + p])

    def idx(pp, qq):
        return qq * w + pp

    ring = []
    for qq in range(n_ew, n):          # right edge, middle upwards
        ring.append(idx(n, qq))
    for pp in range(n, 0, -1):         # top edge, right to left
        ring.append(idx(pp, n))
    for qq in range(n, 0, -1):         # left edge, downwards
        ring.append(idx(0, qq))
    for pp in range(0, n):             # bottom edge, left to right
        ring.append(idx(pp, 0))
    for qq in range(0, n_ew):          # right edge back to the middle
        ring.append(idx(n, qq))
    return pts, els, np.array(ring), idx(n_ew, n_ew)


def _angdiff(a, b):
    return (a - b + math.pi) % (2 * math.pi) - math.pi


def assign_segments(angles: dict) -> dict:
    """Map member id -> arc segment (0..7) preserving the cyclic order of departure angles.

    Among all order-preserving injections, the one with least summed squared
    angular deviation from the segment centres wins; ties go to the earliest
    candidate in lexicographic enumeration, which favours lower member ids.
    """
    if len(angles) > 8:
        raise MeshError("more than eight members at one junction")
    ids = sorted(angles, key=lambda m: (angles[m] % (2 * math.pi), m))
    d = len(ids)
    best, best_cost = None, math.inf
    for combo in itertools.combinations(range(8), d):
        for shift in range(d):
            cost = 0.0
            for r, m in enumerate(ids):
                k = combo[(r + shift) % d]
                cost += _angdiff(angles[m], k * math.pi / 4) ** 2
            if cost < best_cost - 1e-12:
                best_cost = cost
                best = {m: combo[(r + shift) % d] for r, m in enumerate(ids)}
    return best


# ---------------------------------------------------------------------------
# Full candidate mesh


def junction_vertices(t: CandidateTopology) -> set:
    deg = t.degree()
    special = {t.input_port, t.output_port} | set(t.fixed)
    return {v for v, n in deg.items() if n >= 2 or v in special}


def _stage1_cut(centroids, center, radius, from_start: bool) -> int:
    """Number of w-sets to delete from one end: through the last row with a centroid inside."""
    dist = np.linalg.norm(centroids - center, axis=-1).min(axis=1)  # per row
    inside = np.flatnonzero(dist < radius)
    if inside.size == 0:
        return 0
    n = len(dist)
    if from_start:
        return int(inside.max()) + 1 if inside.max() < n else n
    return n - int(inside.min())


def _member_grids(t, n_el, n_ew):
    grids = {}
    for m in t.members:
        pts, tan = hermite_frames(t.hermite(m), n_el)
        grids[m.id] = flesh_member(pts, tan, m.width, n_ew, m.id)
    return grids


def _row_centroids(grid):
    # (n_el, n_ew, 2) element centroids
    return 0.25 * (grid[:-1, :-1] + grid[1:, :-1] + grid[1:, 1:] + grid[:-1, 1:])


def _cuts(t, grids, jv, radii):
    cuts = {}
    for m in t.members:
        cen = _row_centroids(grids[m.id])
        n = len(cen)
        c0 = _stage1_cut(cen, t.positions[m.v0], radii[m.v0], True) if m.v0 in jv else 0
        c1 = _stage1_cut(cen, t.positions[m.v1], radii[m.v1], False) if m.v1 in jv else 0
        cuts[m.id] = (c0, n - c1)  # kept rows are [c0, n - c1)
    return cuts


def _radii(t, jv):
    widths: dict = {}
    for m in t.members:
        widths.setdefault(m.v0, []).append(m.width)
        widths.setdefault(m.v1, []).append(m.width)
    return {v: junction_radius(widths[v]) for v in jv}


def drop_short_members(t: CandidateTopology, n_el: int, n_ew: int) -> tuple:
    """Remove members whose every w-set would be swallowed by junctions, then re-check connectivity."""
    dropped: list = []
    while True:
        jv = junction_vertices(t)
        radii = _radii(t, jv)
        grids = _member_grids(t, n_el, n_ew)
        cuts = _cuts(t, grids, jv, radii)
        short = [mid for mid, (a, b) in cuts.items() if a >= b]
        if not short:
            return t, dropped
        for mid in short:
            log.info("member %d fully consumed by its junctions; removed", mid)
        dropped.extend(short)
        t = t.with_members(set(t.member_ids) - set(short))
        t = t.with_members(connected_to(t, t.output_port))


def mesh_candidate(t: CandidateTopology, n_el: int = 20, n_ew: int = 4,
                   compression: float = COMPRESSION) -> QuadMesh:
    if not t.members:
        raise MeshError("no members to mesh")
    jv = junction_vertices(t)
    radii = _radii(t, jv)
    grids = _member_grids(t, n_el, n_ew)
    cuts = _cuts(t, grids, jv, radii)
    for mid, (a, b) in cuts.items():
        if a >= b:
            raise MeshError(f"member {mid}: all w-sets deleted by junctions", mid)

    # departure directions toward the far edge of the first kept w-set
    incident: dict = {v: {} for v in jv}
    for m in t.members:
        a, b = cuts[m.id]
        g = grids[m.id]
        if m.v0 in jv:
            mid = g[a + 1].mean(axis=0) - t.positions[m.v0]
            incident[m.v0][m.id] = math.atan2(mid[1], mid[0])
        if m.v1 in jv:
            mid = g[b - 1].mean(axis=0) - t.positions[m.v1]
            incident[m.v1][m.id] = math.atan2(mid[1], mid[0])

    tpl_pts, tpl_els, tpl_ring, tpl_center = junction_template(n_ew)
    nodes: list = []
    elements: list = []
    owner: list = []

    def add_nodes(xy):
        start = sum(len(n) for n in nodes)
        nodes.append(np.asarray(xy, dtype=float).reshape(-1, 2))
        return np.arange(start, start + len(nodes[-1]))

    # member nodes first (cut rows at junction ends are replaced by peripheral nodes later)
    node_grid = {}
    for m in t.members:
        a, b = cuts[m.id]
        g = grids[m.id]
        ids = np.full((n_el + 1, n_ew + 1), -1, dtype=int)
        lo = a + 1 if m.v0 in jv else a
        hi = b - 1 if m.v1 in jv else b
        if hi >= lo:
            ids[lo:hi + 1] = add_nodes(g[lo:hi + 1].reshape(-1, 2)).reshape(-1, n_ew + 1)
        node_grid[m.id] = ids

    junctions = {}
    vertex_nodes = {}
    for v in sorted(jv):
        c = t.positions[v]
        jid = add_nodes(c + radii[v] * tpl_pts)
        segs = assign_segments(incident[v])
        junctions[v] = Junction(v, c.copy(), radii[v], int(jid[tpl_center]), jid[tpl_ring], jid,
                                np.empty(0, dtype=int), segs, compression)
        vertex_nodes[v] = int(jid[tpl_center])

    # attach cut rows to peripheral nodes
    for m in t.members:
        a, b = cuts[m.id]
        ids = node_grid[m.id]
        if m.v0 in jv:
            ju = junctions[m.v0]
            seg = ju.segment_nodes(ju.segments[m.id], n_ew)
            ids[a] = seg
        if m.v1 in jv:
            ju = junctions[m.v1]
            seg = ju.segment_nodes(ju.segments[m.id], n_ew)
            ids[b] = seg[::-1]

    xy = np.concatenate(nodes)

    # elements: members (row-major), then junctions
    patches = {}
    for m in t.members:
        a, b = cuts[m.id]
        ids = node_grid[m.id]
        rows = np.arange(a, b)
        start = sum(len(e) for e in elements)
        els = []
        for i in rows:
            for j in range(n_ew):
                els.append([ids[i, j], ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]])
        elements.append(np.array(els, dtype=int))
        owner.append(np.full(len(els), m.id))
        e_ids = np.arange(start, start + len(els)).reshape(len(rows), n_ew)
        patches[m.id] = MemberPatch(m.id, m.v0, m.v1, m.width, rows, e_ids, ids[a:b + 1].copy(),
                                    m.v0 not in jv, m.v1 not in jv)
    for v in sorted(jv):
        ju = junctions[v]
        start = sum(len(e) for e in elements)
        elements.append(ju.nodes[tpl_els])
        owner.append(np.full(len(tpl_els), -(v + 1)))
        ju.elements = np.arange(start, start + len(tpl_els))

    els = np.concatenate(elements)
    mesh = QuadMesh(xy, els, np.concatenate(owner), patches, junctions, t.thickness, n_el, n_ew, vertex_nodes)
    _stage3_shift(mesh)
    for v in sorted(jv):
        _stage4_compress(mesh, junctions[v], compression)
    audit_mesh(mesh)
    return mesh


def _stage3_shift(mesh: QuadMesh) -> None:
    """Pull the first interior node row next to each junction toward the auxiliary-line midpoint."""
    x = mesh.nodes
    periph = set()
    for ju in mesh.junctions.values():
        periph.update(int(i) for i in ju.periph)
    moves = {}
    for p in mesh.patches.values():
        ids = p.nodes
        n = len(ids)
        ends = []
        if not p.free0:
            ends.append((0, 1, 2))
        if not p.free1:
            ends.append((n - 1, n - 2, n - 3))
        for r_p, r_y, r_q in ends:
            if not (0 <= r_q < n):
                continue
            for j in range(ids.shape[1]):
                y = int(ids[r_y, j])
                if y in periph:
                    continue
                P, Q = x[ids[r_p, j]], x[ids[r_q, j]]
                moves[y] = 0.5 * (x[y] + 0.5 * (P + Q))
    for k, v in moves.items():
        x[k] = v


def _stage4_compress(mesh: QuadMesh, ju: Junction, c0: float) -> None:
    if len(ju.segments) < 2:
        ju.compression = 0.0
        return
    attached = set()
    for k in ju.segments.values():
        attached.update(int(i) for i in ju.segment_nodes(k, mesh.n_ew))
    hull_pts = np.vstack([mesh.nodes[sorted(attached)], ju.center[None]])
    hull = convex_hull(hull_pts)
    if len(hull) < 3:
        ju.compression = 0.0
        return
    jel = mesh.elements[ju.elements]
    cent = mesh.nodes[jel].mean(axis=1)
    out_el = ~points_in_polygon(cent, hull)
    cand = sorted(set(int(i) for i in jel[out_el].ravel()) - attached - {ju.center_node})
    if not cand:
        return
    cand = np.array(cand)
    cand = cand[~points_in_polygon(mesh.nodes[cand], hull)]
    if cand.size == 0:
        return
    base = mesh.nodes[cand].copy()
    target = closest_point_on_polygon(base, hull)
    for c in (c0, 0.5, 0.25, 0.0):
        if c > c0:
            continue
        mesh.nodes[cand] = base + c * (target - base)
        if np.all(jacobian_dets(mesh.nodes, jel) > 0):
            ju.compression = c
            return
    ju.compression = 0.0


# ---------------------------------------------------------------------------
# Audit


def boundary_cycles(mesh: QuadMesh) -> list:
    """Boundary sides chained into closed node cycles; raises MeshError if not a disjoint union."""
    sides = mesh.boundary_sides()
    succ: dict = {}
    for e, d in sides:
        a, b = mesh.side(e, d)
        if a in succ:
            raise MeshError(f"boundary node {a} has two outgoing sides")
        succ[a] = (b, e, d)
    cycles = []
    seen = set()
    for start in sorted(succ):
        if start in seen:
            continue
        cyc = []
        n = start
        while True:
            if n not in succ:
                raise MeshError(f"open boundary at node {n}")
            seen.add(n)
            nxt, e, d = succ[n]
            cyc.append((e, d))
            n = nxt
            if n == start:
                break
            if n in seen:
                raise MeshError(f"boundary chain revisits node {n}")
        cycles.append(cyc)
    return cycles


def _edges_cross(mesh: QuadMesh, sides) -> bool:
    a = np.array([mesh.side(e, d) for e, d in sides])
    p, q = mesh.nodes[a[:, 0]], mesh.nodes[a[:, 1]]
    lo, hi = np.minimum(p, q), np.maximum(p, q)
    tol = 1e-9 * max(1.0, float(np.abs(mesh.nodes).max()))
    for i in range(len(a)):
        cand = np.flatnonzero((lo[:, 0] <= hi[i, 0]) & (hi[:, 0] >= lo[i, 0])
                              & (lo[:, 1] <= hi[i, 1]) & (hi[:, 1] >= lo[i, 1]))
        cand = cand[cand > i]
        if cand.size == 0:
            continue
        # sides sharing a node are adjacent on some cycle
        share = ((a[cand, 0] == a[i, 0]) | (a[cand, 0] == a[i, 1])
                 | (a[cand, 1] == a[i, 0]) | (a[cand, 1] == a[i, 1]))
        cand = cand[~share]
        if cand.size and segments_intersect_many(p[i], q[i], p[cand], q[cand], tol).any():
            return True
    return False


def audit_mesh(mesh: QuadMesh) -> None:
    dets = jacobian_dets(mesh.nodes, mesh.elements)
    bad = np.flatnonzero((dets <= 0).any(axis=1))
    if bad.size:
        e = int(bad[0])
        raise MeshError(f"non-positive Jacobian in element {e}", int(mesh.owner[e]))
    cycles = boundary_cycles(mesh)
    if _edges_cross(mesh, [s for c in cycles for s in c]):
        raise MeshError("mesh boundary self-intersects")


# ---------------------------------------------------------------------------
# Surfaces vs mesh


def filter_surfaces_against_mesh(mesh: QuadMesh, surfaces) -> list:
    """Keep only surfaces that neither cut nor overlap any element."""
    sides = mesh.boundary_sides()
    a = np.array([mesh.side(e, d) for e, d in sides])
    p, q = mesh.nodes[a[:, 0]], mesh.nodes[a[:, 1]]
    x = mesh.nodes[mesh.elements]
    kept = []
    for s in surfaces:
        shape = s.shape
        if shape_contains_point(shape, mesh.nodes).any():
            continue
        bnd = shape.boundary
        b0, b1 = bnd, np.roll(bnd, -1, axis=0)
        if segments_intersect_many(b0[:, None], b1[:, None], p[None], q[None], 1e-12).any():
            continue
        probe = np.vstack([bnd, np.asarray(shape.center)[None]])
        if _points_in_any_element(probe, x):
            continue
        kept.append(s)
    return kept


def _points_in_any_element(points, x) -> bool:
    # convex-or-not: use the sign of cross products along all four sides
    for pt in points:
        d = x - pt
        cr = d[:, :, 0] * np.roll(d, -1, axis=1)[:, :, 1] - d[:, :, 1] * np.roll(d, -1, axis=1)[:, :, 0]
        if np.any(np.all(cr >= 0, axis=1)):
            return True
    return False


# ---------------------------------------------------------------------------
# Wear


def wear_rows(mesh: QuadMesh, region) -> dict:
    """Member id -> set of kept w-set positions touched by the given (element, side) region."""
    pos = {}
    for p in mesh.patches.values():
        for r in range(p.elements.shape[0]):
            for e in p.elements[r]:
                pos[int(e)] = (p.id, r)
    out: dict = {}
    for e, _d in region:
        if int(e) in pos:
            mid, r = pos[int(e)]
            out.setdefault(mid, set()).add(r)
    return out


def apply_wear(mesh: QuadMesh, region, w: float) -> QuadMesh:
    """Shrink affected member w-sets laterally by the factor (1 - w) about their centre line."""
    if not 0.0 <= w < 1.0:
        raise WearError(f"wear fraction {w} outside [0, 1)")
    new = mesh.nodes.copy()
    if w == 0.0:
        return mesh.with_nodes(new)
    periph = set()
    for ju in mesh.junctions.values():
        periph.update(int(i) for i in ju.periph)
    done = set()
    for mid, rows in wear_rows(mesh, region).items():
        p = mesh.patches[mid]
        node_rows = set()
        for r in rows:
            node_rows.update((r, r + 1))
        for nr in sorted(node_rows):
            ids = p.nodes[nr]
            if any(int(i) in periph for i in ids):
                continue
            c = 0.5 * (mesh.nodes[ids[0]] + mesh.nodes[ids[-1]])
            for i in ids:
                if int(i) not in done:
                    new[i] = c + (1.0 - w) * (mesh.nodes[i] - c)
                    done.add(int(i))
    worn = mesh.with_nodes(new)
    if np.any(jacobian_dets(worn.nodes, worn.elements) <= 0):
        raise WearError(f"wear fraction {w} inverts elements")
    return worn
