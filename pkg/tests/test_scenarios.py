from dataclasses import replace

import pytest

from ccmsynth.config import Circle, ScenarioSpec, shipped
from ccmsynth.domain import variable_table
from ccmsynth.errors import ConfigError
from ccmsynth.pipeline import analyze, material_for, prepare
from ccmsynth.scenarios import (find_scenario, mesh_density, minimal_force, obstacle_hits, reaches, run_scenario,
                                wrong_key)


@pytest.fixture(scope="module")
def cfg():
    return shipped("test_mechanism")


def test_unmodified_key_reproduces_the_baseline(cfg):
    prep = prepare(cfg.domain(), cfg.design_vector(), cfg.settings)
    an = analyze(prep, material_for(prep, cfg.E, cfg.nu), cfg.settings)
    rep = wrong_key(cfg, ScenarioSpec("wrong-key", cases=({"remove": (), "rotate": ()},)))
    base, same = rep.rows
    assert base == same
    assert base["endpoint"] == [float(c) for c in an.path[-1]]
    assert base["reached"] is True and base["obstacles_hit"] == []


def test_removing_the_block_misses_the_pad_and_report_is_deterministic(cfg):
    spec = ScenarioSpec("wrong-key", cases=({"remove": (0,), "rotate": ()}, {"remove": (), "rotate": (0,)}))
    a = wrong_key(cfg, spec).to_dict()
    b = wrong_key(cfg, spec).to_dict()
    assert a == b
    removed = a["rows"][1]
    assert removed["status"] == "ok" and removed["reached"] is False


def test_rotation_wraps_within_theta_bounds(cfg):
    dom = cfg.domain()
    lo, hi, _ = variable_table(dom)
    i = dom.layout.surface(0).stop - 1
    v = cfg.design_vector()
    expect = lo[i] + (v[i] + 1.0 - lo[i]) % (hi[i] - lo[i])
    assert lo[i] <= expect <= hi[i]
    rep = wrong_key(cfg, ScenarioSpec("wrong-key", cases=({"remove": (), "rotate": (0,)},)))
    assert rep.rows[1]["rotate"] == [0]


def test_obstacles_and_pad_helpers(cfg):
    prep = prepare(cfg.domain(), cfg.design_vector(), cfg.settings)
    an = analyze(prep, material_for(prep, cfg.E, cfg.nu), cfg.settings)
    end = an.path[-1]
    assert reaches(an.path, Circle(tuple(end), 1e-6))
    assert not reaches(an.path, Circle((end[0] + 5, end[1]), 1.0))
    far = Circle((-500.0, -500.0), 1.0)
    on_body = Circle(tuple(prep.mesh.nodes[prep.loops[0].nodes[0]]), 0.5)
    assert obstacle_hits(an, [far, on_body]) == [1]


def test_minimal_force_is_a_bisection_bracket(cfg):
    prep = prepare(cfg.domain(), cfg.design_vector(), cfg.settings)
    f, n = minimal_force(prep, cfg, cfg.pad, 0.0, 0.0, 10.0, 0.5)
    assert 0.0 < f <= 10.0 and n == 2 + 5
    mat = material_for(prep, cfg.E, cfg.nu)
    assert reaches(analyze(prep, mat, cfg.settings, force=f).path, cfg.pad)
    assert not reaches(analyze(prep, mat, cfg.settings, force=f - 0.5).path, cfg.pad)
    unreachable = Circle((500.0, 500.0), 1.0)
    assert minimal_force(prep, cfg, unreachable, 0.0, 0.0, 10.0, 0.5) == (None, 1)


def test_mesh_density_rows_and_failures_do_not_abort(cfg):
    rep = mesh_density(cfg, ScenarioSpec("mesh-density", meshes=((2, 10), (3, 10), (2, 1))))
    ok = [r for r in rep.rows if r["status"] == "ok"]
    assert [(r["n_ew"], r["n_el"]) for r in rep.rows] == [(2, 10), (3, 10), (2, 1)]
    assert len(ok) >= 2
    assert ok[1]["elements"] > ok[0]["elements"]
    assert all(r["te"] is not None and r["te"] >= 0 for r in ok)


def test_scenarios_need_a_design(cfg):
    bare = replace(cfg, design=None)
    for sc in cfg.scenarios:
        with pytest.raises(ConfigError):
            run_scenario(bare, sc)
    with pytest.raises(ConfigError):
        find_scenario(cfg, "nothing")
    assert find_scenario(cfg, "wear-sweep").name == "wear"
