"""Solver input deck: keyword-line dialect writer and a strict validator.

A deck is a sequence of option blocks.  Each block opens with a keyword line
(``*NAME, PARAM=VALUE``) followed by comma-separated data lines.  Model data
(nodes, elements, sets, surfaces, contact pairs, material) precede history
data (one ``*STEP`` with boundary conditions, loads and output requests).
Identifiers are written 1-based.  No line may exceed 256 characters.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DeckError

MAX_LINE = 256
PER_LINE = 16


def _num(x: float) -> str:
    return repr(float(x))


def _wrap(items, per_line: int = PER_LINE) -> list:
    """Comma-separated data lines, continued with a trailing comma."""
    items = [str(i) for i in items]
    lines = []
    for k in range(0, len(items), per_line):
        chunk = ", ".join(items[k:k + per_line])
        lines.append(chunk + ("," if k + per_line < len(items) else ""))
    return lines


@dataclass
class DeckBuilder:
    lines: list = field(default_factory=list)

    def comment(self, text: str) -> None:
        self.lines.append("** " + text)

    def keyword(self, keyword: str, **params) -> None:
        parts = ["*" + keyword] + [f"{k.upper()}={v}" for k, v in params.items()]
        self.lines.append(", ".join(parts))

    def data(self, *values) -> None:
        self.lines.append(", ".join(str(v) for v in values))

    def data_list(self, values) -> None:
        self.lines.extend(_wrap(values))

    def text(self) -> str:
        for i, ln in enumerate(self.lines, 1):
            if len(ln) > MAX_LINE:
                raise DeckError(f"line {i} has {len(ln)} characters (limit {MAX_LINE})")
        return "\n".join(self.lines) + "\n"


def export_deck(nodes, elements, *, loops=(), rigid=(), pairs=(), fixed_nodes=(), load_node=None,
                load=(0.0, 0.0), E: float = 20.0, nu: float = 0.33, thickness: float = 6.0, mu: float = 0.0,
                n_steps: int = 20, output_node=None, title: str = "ccmsynth") -> str:
    """Write a deck.

    ``loops`` is a list of (name, [(element, side), ...]); ``rigid`` a list of
    (name, closed point array); ``pairs`` a list of (follower loop name, target
    name) where the target is a loop (self contact) or a rigid surface.
    """
    x = np.asarray(nodes, dtype=float)
    els = np.asarray(elements, dtype=int).reshape(-1, 4)
    b = DeckBuilder()
    b.comment("compliant mechanism analysis deck")
    b.keyword("HEADING")
    b.data(title.replace(",", " ")[:MAX_LINE])
    b.comment("model data")
    b.keyword("NODE", nset="ALL")
    for i, (px, py) in enumerate(x, 1):
        b.data(i, _num(px), _num(py))
    b.keyword("ELEMENT", type="CPS4I", elset="BODY")
    for i, el in enumerate(els, 1):
        b.data(i, *(int(n) + 1 for n in el))
    names = set()
    for name, sides in loops:
        _check_name(name, names)
        by_face: dict = {}
        for e, d in sides:
            by_face.setdefault(int(d), []).append(int(e) + 1)
        for d in sorted(by_face):
            b.keyword("ELSET", elset=f"{name}_S{d}")
            b.data_list(by_face[d])
        b.keyword("SURFACE", type="ELEMENT", name=name)
        for d in sorted(by_face):
            b.data(f"{name}_S{d}", f"S{d}")
    for name, pts in rigid:
        _check_name(name, names)
        p = np.asarray(pts, dtype=float)
        b.keyword("SURFACE", type="SEGMENTS", name=name)
        b.data("START", _num(p[0, 0]), _num(p[0, 1]))
        for q in list(p[1:]) + [p[0]]:
            b.data("LINE", _num(q[0]), _num(q[1]))
    b.keyword("SURFACE INTERACTION", name="IFACE")
    b.keyword("FRICTION")
    b.data(_num(mu))
    for f, t in pairs:
        if f not in names or t not in names:
            raise DeckError(f"contact pair ({f}, {t}) refers to an undefined surface")
        b.keyword("CONTACT PAIR", interaction="IFACE", type="NODE TO SURFACE")
        b.data(f, t)
    b.keyword("MATERIAL", name="MAT")
    b.keyword("ELASTIC")
    b.data(_num(E), _num(nu))
    b.keyword("SOLID SECTION", elset="BODY", material="MAT")
    b.data(_num(thickness))
    b.comment("history data")
    b.keyword("STEP", nlgeom="YES", inc=max(1000, 50 * n_steps))
    b.keyword("STATIC")
    b.data(_num(1.0 / n_steps), _num(1.0))
    if fixed_nodes:
        b.keyword("BOUNDARY")
        for n in fixed_nodes:
            b.data(int(n) + 1, 1, 2)
    if load_node is not None:
        b.keyword("CLOAD")
        b.data(int(load_node) + 1, 1, _num(load[0]))
        b.data(int(load_node) + 1, 2, _num(load[1]))
    if output_node is not None:
        b.keyword("NSET", nset="OUTPUT")
        b.data(int(output_node) + 1)
        b.keyword("NODE PRINT", nset="OUTPUT")
        b.data("U")
    b.keyword("CONTACT PRINT")
    b.data("CPRESS", "CSLIP")
    b.keyword("END STEP")
    return b.text()


def _check_name(name: str, names: set) -> None:
    if not name or any(c in name for c in ", =*\n") or name in names:
        raise DeckError(f"bad or duplicate surface name {name!r}")
    names.add(name)


def deck_for(prep, material, settings, force: float | None = None) -> str:
    """Deck for a prepared candidate (see ``pipeline.prepare``)."""
    mesh = prep.mesh
    loops = [(f"LOOP{lp.id}", lp.sides) for lp in prep.loops]
    rigid = [(f"KEY{s.id}", s.shape.boundary) for s in prep.surfaces]
    pairs = []
    a = prep.assignment
    for lid in a.self_contact:
        pairs.append((f"LOOP{lid}", f"LOOP{lid}"))
    for lid, gi in a.pairs:
        for sid in a.groups[gi]:
            pairs.append((f"LOOP{lid}", f"KEY{sid}"))
    f = prep.topology.force if force is None else force
    d = np.asarray(settings.direction, dtype=float)
    d = d / np.linalg.norm(d)
    return export_deck(mesh.nodes, mesh.elements, loops=loops, rigid=rigid, pairs=pairs,
                       fixed_nodes=prep.fixed_nodes(), load_node=prep.input_node, load=tuple(f * d),
                       E=material.E, nu=material.nu, thickness=material.thickness, mu=settings.mu,
                       n_steps=settings.n_steps, output_node=prep.output_node)


# ---------------------------------------------------------------------------
# Validation


@dataclass
class DeckSummary:
    n_nodes: int
    n_elements: int
    surfaces: list
    pairs: list
    n_steps: int
    n_lines: int


def _params(line: str):
    parts = [p.strip() for p in line[1:].split(",")]
    name = parts[0].upper()
    params = {}
    for p in parts[1:]:
        if not p:
            continue
        k, _, v = p.partition("=")
        params[k.strip().upper()] = v.strip()
    return name, params


def _blocks(text: str):
    blocks = []
    for i, raw in enumerate(text.splitlines(), 1):
        if len(raw) > MAX_LINE:
            raise DeckError(f"line {i} exceeds {MAX_LINE} characters")
        line = raw.strip()
        if not line or line.startswith("**"):
            continue
        if line.startswith("*"):
            name, params = _params(line)
            blocks.append((i, name, params, []))
        else:
            if not blocks:
                raise DeckError(f"line {i}: data before the first keyword line")
            blocks[-1][3].append((i, line))
    return blocks


def _joined(data) -> list:
    """Merge continued data lines and split into records of fields."""
    recs, cur = [], []
    for _, line in data:
        fields = [f.strip() for f in line.split(",")]
        cont = line.rstrip().endswith(",")
        if cont:
            fields = fields[:-1]
        cur.extend(fields)
        if not cont:
            recs.append(cur)
            cur = []
    if cur:
        recs.append(cur)
    return recs


def validate_deck(text: str) -> DeckSummary:
    """Parse a deck and check structure and cross references; raise DeckError on any defect."""
    blocks = _blocks(text)
    nodes: set = set()
    elements: set = set()
    elsets: dict = {}
    surfaces: dict = {}
    pairs = []
    n_steps = 0
    in_step = False
    try:
        for ln, name, params, data in blocks:
            recs = _joined(data)
            if name == "NODE":
                for r in recs:
                    nid = int(r[0])
                    if len(r) != 3:
                        raise DeckError(f"line {ln}: node record needs id, x, y")
                    float(r[1]), float(r[2])
                    if nid in nodes:
                        raise DeckError(f"duplicate node {nid}")
                    nodes.add(nid)
            elif name == "ELEMENT":
                for r in recs:
                    if len(r) != 5:
                        raise DeckError(f"line {ln}: element record needs id and 4 nodes")
                    eid = int(r[0])
                    for n in r[1:]:
                        if int(n) not in nodes:
                            raise DeckError(f"element {eid} references missing node {n}")
                    if eid in elements:
                        raise DeckError(f"duplicate element {eid}")
                    elements.add(eid)
            elif name == "ELSET":
                ids = [int(v) for r in recs for v in r]
                missing = [e for e in ids if e not in elements]
                if missing:
                    raise DeckError(f"element set {params.get('ELSET')} references missing elements {missing[:5]}")
                elsets[params["ELSET"]] = ids
            elif name == "NSET":
                ids = [int(v) for r in recs for v in r]
                if any(n not in nodes for n in ids):
                    raise DeckError(f"node set {params.get('NSET')} references missing nodes")
            elif name == "SURFACE":
                sname = params["NAME"]
                if params.get("TYPE") == "ELEMENT":
                    for r in recs:
                        if r[0] not in elsets or r[1] not in ("S1", "S2", "S3", "S4"):
                            raise DeckError(f"surface {sname} references undefined set {r[0]}")
                elif params.get("TYPE") == "SEGMENTS":
                    if not recs or recs[0][0] != "START" or any(r[0] != "LINE" for r in recs[1:]):
                        raise DeckError(f"surface {sname} has malformed segments")
                    for r in recs:
                        float(r[1]), float(r[2])
                else:
                    raise DeckError(f"surface {sname} has unknown type")
                surfaces[sname] = params["TYPE"]
            elif name == "CONTACT PAIR":
                for r in recs:
                    if r[0] not in surfaces or r[1] not in surfaces:
                        raise DeckError(f"line {ln}: contact pair references undefined surface")
                    pairs.append((r[0], r[1]))
            elif name == "STEP":
                if in_step:
                    raise DeckError("nested *STEP")
                in_step = True
                n_steps += 1
            elif name == "END STEP":
                if not in_step:
                    raise DeckError("*END STEP without *STEP")
                in_step = False
            elif name in ("BOUNDARY", "CLOAD"):
                if not in_step and name == "CLOAD":
                    raise DeckError("*CLOAD outside a step")
                for r in recs:
                    if int(r[0]) not in nodes:
                        raise DeckError(f"{name} references missing node {r[0]}")
                    if int(r[1]) not in (1, 2):
                        raise DeckError(f"{name} has invalid dof {r[1]}")
                    if name == "CLOAD":
                        float(r[2])
            elif name in ("HEADING", "SURFACE INTERACTION", "FRICTION", "MATERIAL", "ELASTIC",
                          "SOLID SECTION", "STATIC", "NODE PRINT", "CONTACT PRINT"):
                pass
            else:
                raise DeckError(f"line {ln}: unknown keyword *{name}")
    except (ValueError, IndexError, KeyError) as exc:
        raise DeckError(f"malformed deck: {exc}") from exc
    if in_step:
        raise DeckError("unterminated *STEP")
    if not nodes or not elements:
        raise DeckError("deck defines no nodes or no elements")
    return DeckSummary(len(nodes), len(elements), sorted(surfaces), pairs, n_steps,
                       len(text.splitlines()))


__all__ = ["MAX_LINE", "DeckBuilder", "export_deck", "deck_for", "validate_deck", "DeckSummary"]
