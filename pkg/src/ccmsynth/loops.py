"""Contact-loop identification over the skeleton and the fleshed mesh.

Stage one walks the skeleton: from every junction and every member leaving it,
follow the member with the least counter-clockwise turn from the reversed
arrival direction, bouncing back at free ends.  Each walk is one face of the
planar skeleton, with the face on the right of every traversed half-edge.
Stage two replays the walk on the mesh, collecting member band sides and the
junction periphery in between.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import CandidateTopology
from .errors import LoopError
from .geometry import points_in_polygon, polylines_intersect, shape_contains_point, signed_area
from .mesher import QuadMesh

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class HalfEdge:
    member: int
    origin: int
    target: int


@dataclass(frozen=True)
class TraversalPath:
    start: int
    edges: tuple  # HalfEdge cycle

    @property
    def members(self) -> list:
        return [h.member for h in self.edges]

    def canonical(self) -> tuple:
        key = [(h.member, h.origin, h.target) for h in self.edges]
        k = min(range(len(key)), key=lambda i: key[i:] + key[:i])
        return tuple(key[k:] + key[:k])


@dataclass
class Loop:
    id: int
    sides: list               # [(element, side 1..4)]
    nodes: list               # node cycle, first node not repeated
    area: float
    kind: str = "inner"
    path: TraversalPath | None = None


@dataclass
class ContactAssignment:
    pairs: list = field(default_factory=list)          # [(loop id, group index)]
    self_contact: list = field(default_factory=list)   # [loop id]
    groups: list = field(default_factory=list)         # [sorted tuple of surface ids]


def departure_angles(t: CandidateTopology) -> dict:
    """(member, vertex) -> direction in which the member leaves that vertex."""
    out = {}
    for m in t.members:
        h = t.hermite(m)
        out[(m.id, m.v0)] = h.departure_angle(0)
        out[(m.id, m.v1)] = h.departure_angle(1)
    return out


def mesh_angles(mesh: QuadMesh) -> dict:
    """Departure angles implied by the junction arc-segment assignment of a mesh."""
    out = {}
    for v, ju in mesh.junctions.items():
        for m, k in ju.segments.items():
            out[(m, v)] = k * math.pi / 4
    return out


def _adjacency(t: CandidateTopology) -> dict:
    adj: dict = {}
    for m in t.members:
        adj.setdefault(m.v0, []).append((m.id, m.v1))
        adj.setdefault(m.v1, []).append((m.id, m.v0))
    return adj


def trace_paths(t: CandidateTopology, angles: dict | None = None) -> list:
    """Unique closed traversal paths (faces) of the skeleton."""
    if not t.members:
        return []
    ang = departure_angles(t)
    if angles:
        ang.update(angles)
    adj = _adjacency(t)
    psi = sorted(v for v, nb in adj.items() if len(nb) >= 2) or sorted(adj)

    def successor(h: HalfEdge) -> HalfEdge:
        w = h.target
        nb = adj[w]
        if len(nb) == 1:
            return HalfEdge(h.member, w, h.origin)
        back = ang[(h.member, w)]
        best = None
        for mid, other in nb:
            if mid == h.member and other == h.origin:
                continue
            rot = (ang[(mid, w)] - back) % TWO_PI
            key = (rot, mid)
            if best is None or key < best[0]:
                best = (key, HalfEdge(mid, w, other))
        return best[1]

    seen = set()
    paths = []
    for v in psi:
        for mid, other in sorted(adj[v], key=lambda e: (ang[(e[0], v)] % TWO_PI, e[0])):
            first = HalfEdge(mid, v, other)
            cyc = [first]
            h = successor(first)
            guard = 4 * len(t.members) + 4
            while h != first:
                cyc.append(h)
                h = successor(h)
                if len(cyc) > guard:
                    raise LoopError("skeleton walk did not close")
            p = TraversalPath(v, tuple(cyc))
            key = p.canonical()
            if key not in seen:
                seen.add(key)
                paths.append(p)
    return paths


def _band(mesh: QuadMesh, h: HalfEdge) -> list:
    p = mesh.patches[h.member]
    if h.origin == p.v0 and h.target == p.v1 and p.v0 != p.v1:
        return [int(i) for i in p.nodes[:, 0]]
    return [int(i) for i in p.nodes[::-1, -1]]


def _turn(mesh: QuadMesh, h: HalfEdge, nxt: HalfEdge) -> list:
    """Nodes strictly between two bands at the shared vertex."""
    w = h.target
    ju = mesh.junctions.get(w)
    if ju is None:
        raise LoopError(f"vertex {w} has no junction")
    n = mesh.n_ew
    ring = len(ju.periph)
    a = (ju.segments[h.member] * n + n) % ring
    b = (ju.segments[nxt.member] * n) % ring
    steps = (b - a) % ring
    if h.member == nxt.member and steps == 0:
        steps = ring
    return [int(ju.periph[(a + s) % ring]) for s in range(1, steps)]


def _cap(mesh: QuadMesh, h: HalfEdge) -> list:
    p = mesh.patches[h.member]
    if h.target == p.v1:
        return [int(i) for i in p.nodes[-1, 1:-1]]
    return [int(i) for i in p.nodes[0, -2:0:-1]]


def build_loops(paths, mesh: QuadMesh) -> list:
    """Replay each skeleton path on the mesh as a closed cycle of element sides."""
    directed = {}
    for e, d in mesh.boundary_sides():
        directed[mesh.side(e, d)] = (e, d)
    loops = []
    for idx, path in enumerate(paths):
        chain: list = []
        edges = path.edges
        for k, h in enumerate(edges):
            band = _band(mesh, h)
            if chain and chain[-1] == band[0]:
                band = band[1:]
            chain.extend(band)
            nxt = edges[(k + 1) % len(edges)]
            if h.target in mesh.junctions:
                chain.extend(_turn(mesh, h, nxt))
            elif nxt.member == h.member:
                chain.extend(_cap(mesh, h))
            else:
                raise LoopError(f"free end at vertex {h.target} continues onto another member")
        if chain[0] == chain[-1]:
            chain.pop()
        sides = []
        for a, b in zip(chain, chain[1:] + chain[:1]):
            if (a, b) not in directed:
                raise LoopError(f"no boundary side from node {a} to node {b}")
            sides.append(directed[(a, b)])
        area = signed_area(mesh.nodes[chain])
        loops.append(Loop(idx, sides, chain, area, "inner", path))
    if loops:
        outer = max(loops, key=lambda lp: abs(lp.area))
        outer.kind = "outer"
    return loops


def loop_polygon(mesh: QuadMesh, loop: Loop) -> np.ndarray:
    return mesh.nodes[loop.nodes]


def surface_groups(surfaces) -> list:
    """Union overlapping surfaces; groups are sorted tuples of surface ids, ordered by first id."""
    surfaces = sorted(surfaces, key=lambda s: s.id)
    parent = {s.id: s.id for s in surfaces}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, a in enumerate(surfaces):
        for b in surfaces[i + 1:]:
            if _overlap(a.shape, b.shape):
                ra, rb = find(a.id), find(b.id)
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict = {}
    for s in surfaces:
        groups.setdefault(find(s.id), []).append(s.id)
    return [tuple(sorted(g)) for _, g in sorted(groups.items())]


def _overlap(a, b) -> bool:
    if shape_contains_point(a, np.asarray(b.center)[None]).any() or shape_contains_point(b, np.asarray(a.center)[None]).any():
        return True
    return polylines_intersect(a.boundary, b.boundary, closed_p=True, closed_q=True)


def classify_and_assign(loops, surfaces, mesh: QuadMesh) -> ContactAssignment:
    out = ContactAssignment()
    out.self_contact = [lp.id for lp in loops]
    if not loops:
        return out
    out.groups = surface_groups(surfaces)
    by_id = {s.id: s for s in surfaces}
    outer = next(lp for lp in loops if lp.kind == "outer")
    for gi, group in enumerate(out.groups):
        pt = np.asarray(by_id[group[0]].shape.center)[None]
        host = None
        for lp in loops:
            if lp.kind == "inner" and points_in_polygon(pt, loop_polygon(mesh, lp))[0]:
                host = lp
                break
        if host is None:
            if points_in_polygon(pt, loop_polygon(mesh, outer))[0]:
                raise LoopError(f"surface group {group} lies inside the continuum")
            host = outer
        out.pairs.append((host.id, gi))
    return out
