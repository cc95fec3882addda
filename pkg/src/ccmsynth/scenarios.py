"""Post-synthesis studies: wrong keys, friction and wear sweeps, mesh density."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import Circle, JobConfig, ScenarioSpec
from .domain import variable_table
from .errors import CCMError, ConfigError
from .mesher import QuadMesh, apply_wear, wear_rows
from .objective import describe_path, path_length, total_error
from .pipeline import Analysis, Prepared, analyze, material_for, prepare

log = logging.getLogger(__name__)


@dataclass
class ScenarioReport:
    kind: str
    name: str
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "name": self.name, "rows": self.rows}


def reaches(path, pad: Circle) -> bool:
    return bool(pad.contains(np.asarray(path)[-1])[0])


def boundary_nodes(prep: Prepared) -> np.ndarray:
    return np.unique(np.concatenate([np.asarray(lp.nodes, dtype=int) for lp in prep.loops]))


def obstacle_hits(an: Analysis, obstacles) -> list:
    """Indices of obstacles entered by any boundary node at any converged step."""
    if not obstacles:
        return []
    nodes = boundary_nodes(an.prepared)
    x0 = an.prepared.mesh.nodes[nodes]
    hit = set()
    for st in an.result.steps:
        x = x0 + st.u.reshape(-1, 2)[nodes]
        for k, ob in enumerate(obstacles):
            if k not in hit and ob.contains(x).any():
                hit.add(k)
    return sorted(hit)


def _score(cfg: JobConfig, path) -> float | None:
    if not cfg.desired_path_mm:
        return None
    try:
        d = describe_path(path, cfg.n_coeffs, cfg.samples, cfg.ribbon_fraction)
    except CCMError:
        return None
    return total_error(cfg.desired(), d, cfg.weights)


def _require(cfg: JobConfig, what: str):
    if cfg.design is None:
        raise ConfigError(f"{what} needs a [design] vector in the configuration")


# ---------------------------------------------------------------------------


def wrong_key(cfg: JobConfig, spec: ScenarioSpec) -> ScenarioReport:
    """Re-solve with surfaces removed or rotated; the unmodified key is reported first."""
    _require(cfg, "wrong-key")
    dom = cfg.domain()
    lo, hi, _ = variable_table(dom)
    base = cfg.design_vector()
    rep = ScenarioReport(spec.kind, spec.name)
    cases = [{"remove": (), "rotate": ()}] + list(spec.cases)
    for case in cases:
        v = base.copy()
        for k in case.get("remove", ()):
            v[dom.layout.surface_flag(k)] = 0.0
        for k in case.get("rotate", ()):
            i = dom.layout.surface(k).stop - 1
            span = hi[i] - lo[i]
            v[i] = lo[i] + (v[i] + spec.rotate_rad - lo[i]) % span if span > 0 else v[i]
        row = {"remove": list(case.get("remove", ())), "rotate": list(case.get("rotate", ()))}
        try:
            prep = prepare(dom, v, cfg.settings)
            an = analyze(prep, material_for(prep, cfg.E, cfg.nu), cfg.settings)
        except CCMError as exc:
            row.update(status=type(exc).__name__, reached=False, obstacles_hit=[])
            rep.rows.append(row)
            continue
        row.update(status="ok", endpoint=[float(c) for c in an.path[-1]],
                   reached=reaches(an.path, cfg.pad) if cfg.pad else None,
                   obstacles_hit=obstacle_hits(an, cfg.obstacles))
        rep.rows.append(row)
    return rep


def minimal_force(prep: Prepared, cfg: JobConfig, pad: Circle, mu: float, lo: float, hi: float,
                  tol: float) -> tuple:
    """Bisection for the smallest force whose path endpoint lies in the pad.

    Returns (force or None, number of analyses).  Every mu uses the same bracket
    and tolerance, so when reaching is monotone in mu at fixed force the
    returned forces are monotone too.
    """
    mat = material_for(prep, cfg.E, cfg.nu)
    calls = 0

    def ok(f):
        nonlocal calls
        calls += 1
        try:
            return reaches(analyze(prep, mat, cfg.settings, force=f, mu=mu).path, pad)
        except CCMError as exc:
            log.info("force %.4g, mu %.4g failed: %s", f, mu, exc)
            return False

    if not ok(hi):
        return None, calls
    if ok(lo):
        return lo, calls
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi, calls


def friction_sweep(cfg: JobConfig, spec: ScenarioSpec) -> ScenarioReport:
    _require(cfg, "friction-sweep")
    if cfg.pad is None:
        raise ConfigError("friction-sweep needs a [pad] region")
    prep = prepare(cfg.domain(), cfg.design_vector(), cfg.settings)
    rep = ScenarioReport(spec.kind, spec.name)
    for mu in spec.mu:
        f, n = minimal_force(prep, cfg, cfg.pad, mu, spec.force_range[0], spec.force_range[1], spec.force_tol)
        rep.rows.append({"mu": float(mu), "force": f, "analyses": n})
    return rep


def contact_region(an: Analysis) -> set:
    """(element, side) pairs active at any committed step."""
    return set().union(*an.contact.history) if an.contact.history else set()


def worn_width_ratios(mesh: QuadMesh, worn: QuadMesh, region) -> np.ndarray:
    """Width ratio (worn / original) of every shrunk node row in the contact band."""
    periph = set()
    for ju in mesh.junctions.values():
        periph.update(int(i) for i in ju.periph)
    out = []
    for mid, rows in wear_rows(mesh, region).items():
        p = mesh.patches[mid]
        for nr in sorted({r + k for r in rows for k in (0, 1)}):
            ids = p.nodes[nr]
            if any(int(i) in periph for i in ids):
                continue
            a = np.linalg.norm(mesh.nodes[ids[-1]] - mesh.nodes[ids[0]])
            b = np.linalg.norm(worn.nodes[ids[-1]] - worn.nodes[ids[0]])
            out.append(b / a)
    return np.array(out)


def wear_sweep(cfg: JobConfig, spec: ScenarioSpec) -> ScenarioReport:
    """Shrink the elements that touched anything in the unworn run and re-analyse."""
    _require(cfg, "wear-sweep")
    prep = prepare(cfg.domain(), cfg.design_vector(), cfg.settings)
    mat = material_for(prep, cfg.E, cfg.nu)
    base = analyze(prep, mat, cfg.settings, mu=spec.wear_mu)
    region = contact_region(base)
    rep = ScenarioReport(spec.kind, spec.name)
    rep.rows.append({"wear_percent": 0.0, "te": _score(cfg, base.path), "path_length": path_length(base.path),
                     "worn_rows": 0, "status": "ok"})
    for wp in spec.wear_percent:
        w = wp / 100.0
        row = {"wear_percent": float(wp)}
        try:
            worn = apply_wear(prep.mesh, region, w)
            ratios = worn_width_ratios(prep.mesh, worn, region)
            an = analyze(prep, mat, cfg.settings, mu=spec.wear_mu, mesh=worn)
        except CCMError as exc:
            row.update(status=type(exc).__name__, te=None, path_length=None, worn_rows=0)
            rep.rows.append(row)
            continue
        row.update(status="ok", te=_score(cfg, an.path), path_length=path_length(an.path),
                   worn_rows=int(ratios.size),
                   width_ratio=[float(ratios.min()), float(ratios.max())] if ratios.size else None)
        rep.rows.append(row)
    return rep


def mesh_density(cfg: JobConfig, spec: ScenarioSpec) -> ScenarioReport:
    _require(cfg, "mesh-density")
    dom = cfg.domain()
    v = cfg.design_vector()
    rep = ScenarioReport(spec.kind, spec.name)
    for n_ew, n_el in spec.meshes:
        s = replace(cfg.settings, n_ew=n_ew, n_el=n_el)
        t0 = time.perf_counter()
        row = {"n_ew": n_ew, "n_el": n_el}
        try:
            prep = prepare(dom, v, s)
            an = analyze(prep, material_for(prep, cfg.E, cfg.nu), s)
        except CCMError as exc:
            row.update(status=type(exc).__name__, te=None, elements=None, seconds=time.perf_counter() - t0)
            rep.rows.append(row)
            continue
        te = _score(cfg, an.path)
        row.update(status="ok", te=te if te is None or math.isfinite(te) else None,
                   elements=prep.mesh.n_elements, seconds=time.perf_counter() - t0)
        rep.rows.append(row)
    return rep


RUNNERS = {"wrong-key": wrong_key, "friction-sweep": friction_sweep, "wear-sweep": wear_sweep,
           "mesh-density": mesh_density}


def run_scenario(cfg: JobConfig, spec: ScenarioSpec) -> ScenarioReport:
    return RUNNERS[spec.kind](cfg, spec)


def find_scenario(cfg: JobConfig, key: str) -> ScenarioSpec:
    """Look a scenario up by name, falling back to kind."""
    for sc in cfg.scenarios:
        if sc.name == key:
            return sc
    for sc in cfg.scenarios:
        if sc.kind == key:
            return sc
    raise ConfigError(f"no scenario named {key!r}")


__all__ = ["ScenarioReport", "reaches", "obstacle_hits", "minimal_force", "wrong_key", "friction_sweep",
           "contact_region", "worn_width_ratios", "wear_sweep", "mesh_density", "run_scenario", "find_scenario"]
