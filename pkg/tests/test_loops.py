import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccmsynth.domain import SurfaceGeom, build_grid_domain, connected_to, decode
from ccmsynth.geometry import ShapeKind, realize_surface
from ccmsynth.loops import build_loops, classify_and_assign, mesh_angles, surface_groups, trace_paths
from ccmsynth.mesher import mesh_candidate
from ccmsynth.oracles import euler_faces, face_area, faces_bruteforce

from _util import blank_vector

WIDTH = 3.0


def skeleton(dom, members, width=WIDTH):
    v = blank_vector(dom)
    for m in members:
        v[dom.layout.member(m)] = [1, 0, 0, width]
    return decode(dom, v)


def oracle_faces(t):
    pts = {i: tuple(p) for i, p in enumerate(t.positions)}
    return faces_bruteforce(pts, [(m.id, m.v0, m.v1) for m in t.members])


def traced_faces(paths):
    # a walk keeps its face on the right; the oracle keeps it on the left
    return {frozenset((h.member, h.target, h.origin) for h in p.edges) for p in paths}


def check_bijection(t, mesh=None):
    faces = oracle_faces(t)
    paths = trace_paths(t, mesh_angles(mesh) if mesh is not None else None)
    assert len(paths) == len(faces)
    assert traced_faces(paths) == set(faces)
    n_v = len(t.used_vertices())
    assert len(faces) == euler_faces(n_v, len(t.members))
    if mesh is not None:
        loops = build_loops(paths, mesh)
        assert len(loops) == len(paths)
        check_loops(mesh, loops)
    return paths


def check_loops(mesh, loops):
    seen = [s for lp in loops for s in lp.sides]
    assert sorted(seen) == sorted(mesh.boundary_sides())          # each boundary side in exactly one loop
    for lp in loops:
        ends = [mesh.side(e, d) for e, d in lp.sides]
        for (_, b0), (a1, _) in zip(ends, ends[1:] + ends[:1]):
            assert b0 == a1
    outer = [lp for lp in loops if lp.kind == "outer"]
    assert len(outer) == 1
    for lp in loops:
        if lp is not outer[0]:
            assert np.sign(lp.area) == -np.sign(outer[0].area)
            assert abs(lp.area) < abs(outer[0].area)


def unit_block():
    return build_grid_domain(1, 1, 10.0, 0, 4, {1})


def _connected_subsets(dom, max_members):
    n = len(dom.members)
    for k in range(1, max_members + 1):
        for combo in itertools.combinations(range(n), k):
            t = skeleton(dom, combo)
            root = t.members[0].v0
            if len(connected_to(t, root)) == k:
                yield t


def test_single_dangling_member_walks_back_and_forth():
    t = skeleton(unit_block(), [0])
    paths = check_bijection(t)
    assert len(paths) == 1
    assert paths[0].members == [0, 0]


def test_triangle_gives_outer_and_inner_face():
    dom = unit_block()
    ids = [dom.members.index(e) for e in [(0, 1), (0, 2), (1, 2)]]
    paths = check_bijection(skeleton(dom, ids))
    assert len(paths) == 2
    assert all(sorted(set(p.members)) == sorted(ids) for p in paths)


def test_oracle_bijection_on_every_connected_unit_block_skeleton():
    dom = unit_block()
    assert len(dom.members) == 8
    count = 0
    for t in _connected_subsets(dom, 8):
        check_bijection(t)
        count += 1
    assert count > 100


@pytest.mark.parametrize("members", [[(0, 1), (1, 4), (3, 4), (0, 3)],
                                     [(0, 1), (1, 4), (3, 4), (0, 3), (0, 2), (2, 4)],
                                     [(0, 2), (1, 2), (2, 3), (2, 4)],
                                     [(0, 1), (0, 2), (1, 2), (2, 4)]])
def test_mesh_loops_match_faces(members):
    dom = unit_block()
    t = skeleton(dom, [dom.members.index(e) for e in members])
    mesh = mesh_candidate(t, 10, 2)
    check_bijection(t, mesh)


def test_mesh_loops_on_all_unit_block_skeletons_with_a_cycle():
    dom = unit_block()
    done = 0
    for t in _connected_subsets(dom, 8):
        if len(t.members) < 3 or len(t.members) - len(t.used_vertices()) + 1 < 1:
            continue
        check_bijection(t, mesh_candidate(t, 6, 2))
        done += 1
    assert done > 50


def _random_skeleton(dom, rng, max_members=12):
    k = int(rng.integers(1, max_members + 1))
    pick = rng.choice(len(dom.members), size=k, replace=False)
    t = skeleton(dom, sorted(int(i) for i in pick))
    keep = connected_to(t, t.members[0].v0)
    return t.with_members(keep)


def test_oracle_bijection_on_random_two_by_two_skeletons():
    dom = build_grid_domain(2, 2, 10.0, 0, 12, {2})
    rng = np.random.default_rng(7)
    meshed = 0
    for _ in range(100):
        t = _random_skeleton(dom, rng)
        check_bijection(t)
        if len(t.members) >= 3:
            check_bijection(t, mesh_candidate(t, 6, 2))
            meshed += 1
    assert meshed > 20


def test_bounded_oracle_faces_are_counter_clockwise():
    dom = unit_block()
    t = skeleton(dom, range(8))
    pts = {i: tuple(p) for i, p in enumerate(t.positions)}
    areas = sorted(face_area(pts, f) for f in oracle_faces(t))
    assert areas[0] < 0 and all(a > 0 for a in areas[1:])
    assert len(areas) == 5


# ---------------------------------------------------------------------------
# contact assignment


def _circle(sid, centre, r):
    return SurfaceGeom(sid, realize_surface(ShapeKind.CIRCLE, centre, r, 1.0, 1.0))


def _ring_mesh():
    dom = unit_block()
    t = skeleton(dom, [dom.members.index(e) for e in [(0, 1), (1, 4), (3, 4), (0, 3)]], width=4.0)
    mesh = mesh_candidate(t, 10, 2)
    loops = build_loops(trace_paths(t, mesh_angles(mesh)), mesh)
    return mesh, loops


def test_no_surfaces_means_self_contact_only():
    mesh, loops = _ring_mesh()
    a = classify_and_assign(loops, [], mesh)
    assert a.pairs == [] and a.groups == []
    assert sorted(a.self_contact) == sorted(lp.id for lp in loops)


def test_overlapping_outside_circles_form_one_group_paired_with_outer():
    mesh, loops = _ring_mesh()
    outer = next(lp for lp in loops if lp.kind == "outer")
    inner = next(lp for lp in loops if lp.kind == "inner")
    surfaces = [_circle(0, (130.0, 50.0), 8.0), _circle(1, (140.0, 50.0), 8.0), _circle(2, (50.0, 50.0), 10.0)]
    a = classify_and_assign(loops, surfaces, mesh)
    assert a.groups == [(0, 1), (2,)]
    assert sorted(a.pairs) == sorted([(outer.id, 0), (inner.id, 1)])


@settings(max_examples=10)
@given(st.permutations(range(3)))
def test_assignment_invariant_under_surface_order(order):
    mesh, loops = _ring_mesh()
    surfaces = [_circle(0, (130.0, 50.0), 8.0), _circle(1, (140.0, 50.0), 8.0), _circle(2, (50.0, 50.0), 10.0)]
    ref = classify_and_assign(loops, surfaces, mesh)
    got = classify_and_assign(loops, [surfaces[i] for i in order], mesh)
    assert (got.groups, got.pairs, got.self_contact) == (ref.groups, ref.pairs, ref.self_contact)


def test_surface_groups_union_chains():
    s = [_circle(0, (0, 0), 5), _circle(1, (8, 0), 5), _circle(2, (16, 0), 5), _circle(3, (100, 0), 5)]
    assert surface_groups(s) == [(0, 1, 2), (3,)]
