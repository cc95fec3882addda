"""Design vector to traced output path: decode, filter, mesh, loops, contact, solve."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .contact import ContactHandler, ContactPair, ContactTarget, penalty_parameters, tributary_areas
from .domain import CandidateTopology, DesignDomain, decode, filter_candidate, validate
from .errors import CCMError, DecodeError
from .fem import LoadCase, Material, SolveResult, SolverOptions, solve
from .loops import ContactAssignment, build_loops, classify_and_assign, mesh_angles, trace_paths
from .mesher import QuadMesh, audit_mesh, drop_short_members, filter_surfaces_against_mesh, mesh_candidate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnalysisSettings:
    n_el: int = 20
    n_ew: int = 4
    n_steps: int = 20
    direction: tuple = (1.0, 0.0)
    mu: float = 0.0
    self_contact: bool = True
    formulation: str = "eas"
    compression: float = 0.75


@dataclass
class Prepared:
    """A candidate after every geometric preprocessing stage, ready for analysis."""

    topology: CandidateTopology
    mesh: QuadMesh
    loops: list
    assignment: ContactAssignment
    surfaces: list                      # SurfaceGeom kept after the mesh check
    removed_members: list = field(default_factory=list)
    removed_surfaces: list = field(default_factory=list)

    @property
    def input_node(self) -> int:
        return self.mesh.vertex_nodes[self.topology.input_port]

    @property
    def output_node(self) -> int:
        return self.mesh.vertex_nodes[self.topology.output_port]

    def fixed_nodes(self) -> tuple:
        out = []
        for v in sorted(self.topology.fixed):
            ju = self.mesh.junctions.get(v)
            if ju is not None:
                out.extend(int(i) for i in ju.nodes)
        return tuple(sorted(set(out)))


@dataclass
class Analysis:
    prepared: Prepared
    result: SolveResult
    contact: ContactHandler
    force: float

    @property
    def path(self) -> np.ndarray:
        return self.result.path


class InvalidCandidate(CCMError):
    def __init__(self, missing):
        super().__init__("candidate lacks " + ", ".join(missing))
        self.missing = missing


def prepare_topology(t: CandidateTopology, settings: AnalysisSettings = AnalysisSettings()) -> Prepared:
    before_m = set(t.member_ids)
    before_s = set(t.surface_ids)
    t = filter_candidate(t, settings.n_el)
    t, _ = drop_short_members(t, settings.n_el, settings.n_ew)
    val = validate(t)
    if not val.ok:
        raise InvalidCandidate(val.missing())
    mesh = mesh_candidate(t, settings.n_el, settings.n_ew, settings.compression)
    audit_mesh(mesh)
    surfaces = filter_surfaces_against_mesh(mesh, t.surfaces)
    t = t.with_surfaces(s.id for s in surfaces)
    loops = build_loops(trace_paths(t, mesh_angles(mesh)), mesh)
    assignment = classify_and_assign(loops, surfaces, mesh)
    return Prepared(t, mesh, loops, assignment, surfaces,
                    sorted(before_m - set(t.member_ids)), sorted(before_s - set(t.surface_ids)))


def prepare(domain: DesignDomain, v, settings: AnalysisSettings = AnalysisSettings()) -> Prepared:
    return prepare_topology(decode(domain, v), settings)


def repaired_vector(domain: DesignDomain, v, prep: Prepared) -> np.ndarray:
    """The design vector with flags of members and surfaces removed during preprocessing cleared."""
    out = np.array(v, dtype=float)
    lay = domain.layout
    for m in prep.removed_members:
        out[lay.member_flag(m)] = 0.0
    for s in prep.removed_surfaces:
        out[lay.surface_flag(s)] = 0.0
    return out


def build_contact(prep: Prepared, material: Material, settings: AnalysisSettings = AnalysisSettings(),
                  mu: float | None = None, mesh: QuadMesh | None = None) -> ContactHandler:
    mesh = mesh or prep.mesh
    mu = settings.mu if mu is None else mu
    widths = [m.width for m in prep.topology.members]
    params = penalty_parameters(material.E, mesh.mean_edge(), min(widths))
    by_id = {s.id: s for s in prep.surfaces}
    pairs = []
    for lp in prep.loops:
        chain = np.array(lp.nodes, dtype=int)
        areas = tributary_areas(mesh.nodes[chain], material.thickness, closed=True)
        idx = np.arange(len(chain))
        fsides = [[lp.sides[i - 1], lp.sides[i]] for i in range(len(chain))]
        if settings.self_contact and prep.assignment.self_contact and lp.id in prep.assignment.self_contact:
            pairs.append(ContactPair(chain, areas, ContactTarget(("loop", lp.id), nodes=chain, sides=lp.sides),
                                     self_contact=True, own_chain=chain, chain_index=idx, follower_sides=fsides))
        for loop_id, gi in prep.assignment.pairs:
            if loop_id != lp.id:
                continue
            for sid in prep.assignment.groups[gi]:
                tgt = ContactTarget(("surface", sid), points=by_id[sid].shape.boundary)
                pairs.append(ContactPair(chain, areas, tgt, own_chain=chain, chain_index=idx,
                                         follower_sides=fsides, mu=mu))
    return ContactHandler(pairs, params)


def load_case(prep: Prepared, force: float, settings: AnalysisSettings = AnalysisSettings()) -> LoadCase:
    return LoadCase(prep.input_node, settings.direction, force, prep.fixed_nodes(), settings.n_steps)


def analyze(prep: Prepared, material: Material, settings: AnalysisSettings = AnalysisSettings(),
            force: float | None = None, mu: float | None = None, mesh: QuadMesh | None = None) -> Analysis:
    """Solve the prepared candidate; ``mesh`` may substitute node positions (e.g. a worn mesh)."""
    mesh = mesh or prep.mesh
    force = prep.topology.force if force is None else force
    handler = build_contact(prep, material, settings, mu, mesh)
    lc = load_case(prep, force, settings)
    opts = SolverOptions(n_steps=settings.n_steps, formulation=settings.formulation)
    res = solve(mesh.nodes, mesh.elements, material, lc, prep.output_node, handler, opts)
    return Analysis(prep, res, handler, force)


def material_for(prep_or_t, E: float, nu: float) -> Material:
    t = prep_or_t.topology if isinstance(prep_or_t, Prepared) else prep_or_t
    return Material(E, nu, t.thickness)


def with_force(domain: DesignDomain, v, force: float) -> np.ndarray:
    out = np.array(v, dtype=float)
    out[domain.layout.force] = force
    return out


def safe_prepare(domain, v, settings):
    """``prepare`` returning (Prepared | None, status string)."""
    try:
        return prepare(domain, v, settings), "ok"
    except InvalidCandidate as exc:
        return None, "invalid:" + "+".join(exc.missing)
    except DecodeError:
        raise
    except CCMError as exc:
        log.debug("preprocessing failed: %s", exc)
        return None, "preprocess:" + type(exc).__name__


__all__ = ["AnalysisSettings", "Prepared", "Analysis", "InvalidCandidate", "prepare", "prepare_topology",
           "repaired_vector", "build_contact", "load_case", "analyze", "material_for", "with_force",
           "safe_prepare"]
