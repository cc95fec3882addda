"""Ground-structure design domain, design-vector decoding and candidate filtering.

Lengths in the domain definition are centimetres; decoded topologies are
expressed in millimetres, the working unit of the mesher and solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DecodeError
from .geometry import (HermiteMember, SurfaceShape, hermite_polyline, polylines_intersect,
                       realize_surface, shape_contains_point)

CM = 10.0  # mm per cm

MEMBER_GENES = 4   # flag, T1, T2, width
SURFACE_GENES = 8  # flag, shape, x, y, R, f1, f2, theta

KIND_CONT, KIND_FLAG, KIND_SHAPE = 0, 1, 2


@dataclass(frozen=True)
class Bounds:
    """Variable ranges with the units used in the design vector."""

    slope: tuple = (-0.5, 0.5)          # rad
    width: tuple = (2.0, 6.0)           # mm
    thickness: tuple = (6.0, 6.0)       # mm
    offset: tuple = (-20.0, 20.0)       # mm
    center_x: tuple | None = None       # cm, defaults to the domain extent
    center_y: tuple | None = None
    radius: tuple = (1.0, 5.0)          # cm
    factor: tuple = (0.1, 1.0)
    theta: tuple = (0.0, math.pi)       # rad
    force: tuple = (0.0, 10.0)          # N

    def __post_init__(self):
        for name in ("slope", "width", "thickness", "offset", "center_x", "center_y",
                     "radius", "factor", "theta", "force"):
            lo_hi = getattr(self, name)
            if lo_hi is not None and lo_hi[0] > lo_hi[1]:
                raise ConfigError(f"bound {name!r} has lower > upper: {lo_hi}")


@dataclass(frozen=True)
class DesignDomain:
    nx: int
    ny: int
    block_size: float                       # cm
    vertices: np.ndarray                    # (N_p, 2) base positions, cm
    fixed: frozenset
    members: tuple                          # ((a, b), ...) with a < b
    input_port: int
    output_port: int
    surface_centers: np.ndarray             # (N_s, 2) initial centres, cm
    bounds: Bounds = field(default_factory=Bounds)

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_surfaces(self) -> int:
        return len(self.surface_centers)

    @property
    def extent(self) -> tuple:
        return self.nx * self.block_size, self.ny * self.block_size

    @property
    def layout(self) -> "VectorLayout":
        return VectorLayout(self.n_members, self.n_vertices, self.n_surfaces)

    def center_bounds(self):
        bx = self.bounds.center_x or (0.0, self.extent[0])
        by = self.bounds.center_y or (0.0, self.extent[1])
        return bx, by


def _grid_vertices(nx, ny, bs):
    pts = []
    for j in range(ny + 1):
        for i in range(nx + 1):
            pts.append((j * bs, i * bs))
    for j in range(ny):
        for i in range(nx):
            pts.append(((j + 0.5) * bs, (i + 0.5) * bs))
    pts.sort()
    return np.array([(x, y) for y, x in pts], dtype=float)


def default_surface_centers(nx, ny, bs, n_surfaces):
    """Spread ``n_surfaces`` initial centres over a near-square grid covering the domain."""
    if n_surfaces <= 0:
        return np.zeros((0, 2))
    W, H = nx * bs, ny * bs
    cols = max(1, int(math.ceil(math.sqrt(n_surfaces * W / H))))
    rows = int(math.ceil(n_surfaces / cols))
    out = []
    for k in range(n_surfaces):
        r, c = divmod(k, cols)
        out.append(((c + 0.5) * W / cols, (r + 0.5) * H / rows))
    return np.array(out, dtype=float)


def build_grid_domain(nx: int, ny: int, block_size: float, input_port: int, output_port: int,
                      fixed, n_surfaces: int = 0, surface_centers=None,
                      bounds: Bounds | None = None) -> DesignDomain:
    """Ground structure of ``nx`` x ``ny`` blocks, each with 4 edges and 4 half-diagonals.

    Vertices are numbered row-major by (y, x) with block centres interleaved;
    members are emitted block by block (bottom, right, top, left, then the
    centre-to-corner diagonals BL, BR, TR, TL), shared edges only once.
    """
    if nx < 1 or ny < 1:
        raise ConfigError("nx and ny must be >= 1")
    if block_size <= 0:
        raise ConfigError("block_size must be positive")
    verts = _grid_vertices(nx, ny, block_size)
    index = {(round(x / block_size * 2), round(y / block_size * 2)): k for k, (x, y) in enumerate(verts)}

    def vid(i2, j2):
        return index[(i2, j2)]

    members: list = []
    seen = set()
    for j in range(ny):
        for i in range(nx):
            bl, br = vid(2 * i, 2 * j), vid(2 * i + 2, 2 * j)
            tr, tl = vid(2 * i + 2, 2 * j + 2), vid(2 * i, 2 * j + 2)
            c = vid(2 * i + 1, 2 * j + 1)
            for a, b in ((bl, br), (br, tr), (tl, tr), (bl, tl)):
                key = (min(a, b), max(a, b))
                if key not in seen:
                    seen.add(key)
                    members.append(key)
            for corner in (bl, br, tr, tl):
                members.append((min(c, corner), max(c, corner)))

    n_p = len(verts)
    fixed = frozenset(int(f) for f in fixed)
    for name, v in (("input_port", input_port), ("output_port", output_port)):
        if not 0 <= int(v) < n_p:
            raise ConfigError(f"{name} {v} out of range 0..{n_p - 1}")
    if any(not 0 <= f < n_p for f in fixed):
        raise ConfigError(f"fixed vertex out of range 0..{n_p - 1}")
    if input_port == output_port:
        raise ConfigError("input and output ports must differ")
    if not fixed:
        raise ConfigError("at least one fixed vertex is required")
    if surface_centers is None:
        surface_centers = default_surface_centers(nx, ny, block_size, n_surfaces)
    surface_centers = np.asarray(surface_centers, dtype=float).reshape(-1, 2)
    return DesignDomain(nx, ny, float(block_size), verts, fixed, tuple(members), int(input_port),
                        int(output_port), surface_centers, bounds or Bounds())


def vector_size(domain_or_counts) -> int:
    if isinstance(domain_or_counts, DesignDomain):
        n_m, n_p, n_s = domain_or_counts.n_members, domain_or_counts.n_vertices, domain_or_counts.n_surfaces
    else:
        n_m, n_p, n_s = domain_or_counts
    return n_m * MEMBER_GENES + 1 + n_p * 2 + n_s * SURFACE_GENES + 1


@dataclass(frozen=True)
class VectorLayout:
    """Index arithmetic for the flat design vector."""

    n_members: int
    n_vertices: int
    n_surfaces: int

    @property
    def thickness(self) -> int:
        return self.n_members * MEMBER_GENES

    @property
    def offsets(self) -> slice:
        s = self.thickness + 1
        return slice(s, s + 2 * self.n_vertices)

    @property
    def surfaces_start(self) -> int:
        return self.offsets.stop

    @property
    def force(self) -> int:
        return self.surfaces_start + self.n_surfaces * SURFACE_GENES

    @property
    def size(self) -> int:
        return self.force + 1

    def member(self, m: int) -> slice:
        return slice(m * MEMBER_GENES, (m + 1) * MEMBER_GENES)

    def surface(self, s: int) -> slice:
        a = self.surfaces_start + s * SURFACE_GENES
        return slice(a, a + SURFACE_GENES)

    def member_flag(self, m: int) -> int:
        return m * MEMBER_GENES

    def surface_flag(self, s: int) -> int:
        return self.surfaces_start + s * SURFACE_GENES


def variable_table(domain: DesignDomain):
    """Per-entry (lower, upper, kind) arrays for the domain's design vector."""
    lay = domain.layout
    b = domain.bounds
    lo = np.empty(lay.size)
    hi = np.empty(lay.size)
    kind = np.full(lay.size, KIND_CONT, dtype=np.int8)
    for m in range(lay.n_members):
        s = lay.member(m).start
        lo[s:s + 4] = (0, b.slope[0], b.slope[0], b.width[0])
        hi[s:s + 4] = (1, b.slope[1], b.slope[1], b.width[1])
        kind[s] = KIND_FLAG
    lo[lay.thickness], hi[lay.thickness] = b.thickness
    lo[lay.offsets], hi[lay.offsets] = b.offset
    (cx0, cx1), (cy0, cy1) = domain.center_bounds()
    for k in range(lay.n_surfaces):
        s = lay.surface(k).start
        lo[s:s + 8] = (0, 1, cx0, cy0, b.radius[0], b.factor[0], b.factor[0], b.theta[0])
        hi[s:s + 8] = (1, 3, cx1, cy1, b.radius[1], b.factor[1], b.factor[1], b.theta[1])
        kind[s] = KIND_FLAG
        kind[s + 1] = KIND_SHAPE
    lo[lay.force], hi[lay.force] = b.force
    return lo, hi, kind


def initial_vector(domain: DesignDomain) -> np.ndarray:
    """All flags set, continuous genes at mid-range, surfaces at their initial centres."""
    lo, hi, kind = variable_table(domain)
    v = 0.5 * (lo + hi)
    v[kind == KIND_FLAG] = 1.0
    v[kind == KIND_SHAPE] = 1.0
    lay = domain.layout
    for k in range(lay.n_surfaces):
        s = lay.surface(k).start
        v[s + 2:s + 4] = np.clip(domain.surface_centers[k], lo[s + 2:s + 4], hi[s + 2:s + 4])
    return v


# ---------------------------------------------------------------------------
# Decoded candidates


@dataclass(frozen=True)
class MemberGeom:
    id: int
    v0: int
    v1: int
    tau0: float
    tau1: float
    width: float  # mm


@dataclass(frozen=True)
class SurfaceGeom:
    id: int
    shape: SurfaceShape  # realised in mm


@dataclass(frozen=True)
class Validity:
    has_input: bool
    has_output: bool
    has_fixed: bool

    @property
    def ok(self) -> bool:
        return self.has_input and self.has_output and self.has_fixed

    def missing(self) -> list:
        out = []
        if not self.has_input:
            out.append("input port absent")
        if not self.has_output:
            out.append("output port absent")
        if not self.has_fixed:
            out.append("fixed vertex absent")
        return out


@dataclass(frozen=True)
class CandidateTopology:
    positions: np.ndarray           # (N_p, 2) resolved vertex positions, mm
    members: tuple                  # MemberGeom, ascending id
    surfaces: tuple                 # SurfaceGeom, ascending id
    thickness: float                # mm
    force: float                    # N
    input_port: int
    output_port: int
    fixed: frozenset
    block_size_mm: float

    @property
    def member_ids(self) -> list:
        return [m.id for m in self.members]

    @property
    def surface_ids(self) -> list:
        return [s.id for s in self.surfaces]

    def hermite(self, m: MemberGeom) -> HermiteMember:
        return HermiteMember(tuple(self.positions[m.v0]), tuple(self.positions[m.v1]), m.tau0, m.tau1)

    def degree(self) -> dict:
        deg: dict = {}
        for m in self.members:
            deg[m.v0] = deg.get(m.v0, 0) + 1
            deg[m.v1] = deg.get(m.v1, 0) + 1
        return deg

    def used_vertices(self) -> set:
        return set(self.degree())

    def validity(self) -> Validity:
        used = self.used_vertices()
        return Validity(self.input_port in used, self.output_port in used, bool(used & self.fixed))

    def with_members(self, keep) -> "CandidateTopology":
        keep = set(keep)
        return replace(self, members=tuple(m for m in self.members if m.id in keep))

    def with_surfaces(self, keep) -> "CandidateTopology":
        keep = set(keep)
        return replace(self, surfaces=tuple(s for s in self.surfaces if s.id in keep))


def check_vector(domain: DesignDomain, v, tol: float = 1e-9) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != vector_size(domain):
        raise DecodeError(f"design vector length {v.size} != {vector_size(domain)}")
    if not np.all(np.isfinite(v)):
        raise DecodeError("design vector contains non-finite entries")
    lo, hi, kind = variable_table(domain)
    bad = np.flatnonzero((v < lo - tol) | (v > hi + tol))
    if bad.size:
        i = int(bad[0])
        raise DecodeError(f"entry {i} = {v[i]} outside [{lo[i]}, {hi[i]}]")
    discrete = kind != KIND_CONT
    if np.any(v[discrete] != np.round(v[discrete])):
        raise DecodeError("discrete entries must be integers")
    return v


def decode(domain: DesignDomain, v) -> CandidateTopology:
    v = check_vector(domain, v)
    lay = domain.layout
    lo, hi, _ = variable_table(domain)
    offs = np.clip(v[lay.offsets], lo[lay.offsets], hi[lay.offsets]).reshape(-1, 2)
    positions = domain.vertices * CM + offs

    members = []
    for m, (a, b) in enumerate(domain.members):
        g = v[lay.member(m)]
        if g[0] == 1:
            members.append(MemberGeom(m, a, b, float(g[1]), float(g[2]), float(g[3])))
    surfaces = []
    for k in range(lay.n_surfaces):
        g = v[lay.surface(k)]
        if g[0] == 1:
            shape = realize_surface(int(g[1]), (g[2] * CM, g[3] * CM), g[4] * CM, g[5], g[6], g[7])
            surfaces.append(SurfaceGeom(k, shape))
    return CandidateTopology(positions, tuple(members), tuple(surfaces), float(v[lay.thickness]),
                             float(v[lay.force]), domain.input_port, domain.output_port,
                             domain.fixed, domain.block_size * CM)


# ---------------------------------------------------------------------------
# Filtering


def member_polylines(t: CandidateTopology, n_el: int) -> dict:
    return {m.id: hermite_polyline(t.hermite(m), n_el) for m in t.members}


def _surface_hits(t, polys, tol):
    drop = set()
    for m in t.members:
        p = polys[m.id]
        for s in t.surfaces:
            if shape_contains_point(s.shape, p).any() or polylines_intersect(p, s.shape.boundary, closed_q=True, tol=tol):
                drop.add(m.id)
                break
    return drop


def _mutual_hits(t, polys, tol):
    drop = set()
    ms = t.members
    for i in range(len(ms)):
        for j in range(i + 1, len(ms)):
            if polylines_intersect(polys[ms[i].id], polys[ms[j].id], tol=tol):
                drop.update((ms[i].id, ms[j].id))
    return drop


def connected_to(t: CandidateTopology, root: int) -> set:
    """Ids of members in the connected component containing vertex ``root`` (union-find)."""
    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m in t.members:
        ra, rb = find(m.v0), find(m.v1)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    if root not in parent:
        return set()
    r = find(root)
    return {m.id for m in t.members if find(m.v0) == r}


def filter_candidate(t: CandidateTopology, n_el: int = 20, tol: float | None = None) -> CandidateTopology:
    """Drop surface-crossing members, crossing member pairs, then detached members, to a fixed point."""
    if tol is None:
        tol = 1e-6 * t.block_size_mm
    while True:
        polys = member_polylines(t, n_el)
        before = set(t.member_ids)
        t = t.with_members(before - _surface_hits(t, polys, tol))
        t = t.with_members(set(t.member_ids) - _mutual_hits(t, polys, tol))
        t = t.with_members(connected_to(t, t.output_port))
        if set(t.member_ids) == before:
            return t


def validate(t: CandidateTopology) -> Validity:
    return t.validity()
