import math

import numpy as np
import pytest

from ccmsynth.config import shipped
from ccmsynth.domain import KIND_CONT, KIND_FLAG, KIND_SHAPE, build_grid_domain, check_vector, initial_vector, \
    variable_table
from ccmsynth.objective import PENALTY, describe_path
from ccmsynth.pipeline import AnalysisSettings
from ccmsynth.search import EvalResult, Problem, SearchConfig, mutate, problem_from_config, run, search_config_from

from _util import beam_domain


def paper_domain():
    return build_grid_domain(3, 3, 15.0, 7, 3, {0, 16, 21, 24}, n_surfaces=9)


class StubProblem(Problem):
    """Cheap analytic objective; vectors with member 0 absent are penalised."""

    def evaluate(self, v):
        v = check_vector(self.domain, v)
        lo, hi, kind = variable_table(self.domain)
        if v[self.domain.layout.member(0).start] == 0:
            return EvalResult(PENALTY, "invalid", v)
        c = kind == KIND_CONT
        span = np.where(hi > lo, hi - lo, 1.0)
        te = float(np.sum(((v[c] - lo[c]) / span[c]) ** 2)) + 0.5 * float(np.sum(v[kind == KIND_SHAPE]))
        return EvalResult(te, "ok", v)


def stub(dom=None):
    dom = dom or build_grid_domain(2, 2, 5.0, 7, 6, {5}, n_surfaces=4)
    return StubProblem(dom, None)


def test_mutation_count_matches_binomial_expectation():
    dom = paper_domain()
    lo, hi, kind = variable_table(dom)
    assert lo.size == 364
    v = initial_vector(dom)
    rng = np.random.default_rng(0)
    counts = [np.count_nonzero(mutate(v, 0.08, rng, lo, hi, kind) != v) for _ in range(10_000)]
    # a shape redraw keeps its old value a third of the time; the shortfall is well inside 5%
    expect = 0.08 * 364
    assert abs(np.mean(counts) - expect) <= 0.05 * expect


def test_mutation_limits():
    dom = paper_domain()
    lo, hi, kind = variable_table(dom)
    v = initial_vector(dom)
    rng = np.random.default_rng(3)
    np.testing.assert_array_equal(mutate(v, 0.0, rng, lo, hi, kind), v)
    w = mutate(v, 1.0, rng, lo, hi, kind)
    flags = kind == KIND_FLAG
    np.testing.assert_array_equal(w[flags], 1 - v[flags])
    cont = (kind == KIND_CONT) & (hi > lo)
    assert np.all(w[cont] != v[cont])
    assert np.all((w >= lo) & (w <= hi))
    assert set(np.unique(w[kind == KIND_SHAPE])) <= {1.0, 2.0, 3.0}


def test_mutants_stay_within_bounds():
    dom = paper_domain()
    lo, hi, kind = variable_table(dom)
    rng = np.random.default_rng(11)
    v = initial_vector(dom)
    for _ in range(200):
        v = mutate(v, 0.3, rng, lo, hi, kind)
        assert np.all((v >= lo) & (v <= hi))
        check_vector(dom, v)


def test_mutation_probability_validated():
    with pytest.raises(ValueError):
        SearchConfig(p=0.0)
    with pytest.raises(ValueError):
        SearchConfig(p=1.5)
    SearchConfig(p=1.0)


def _accepted(res):
    return [h for h in res.history if h.accepted]


def test_stub_search_is_reproducible_and_monotone():
    a = run(SearchConfig(p=0.1, max_iter=300, seed=5), stub(), keep_vectors=True)
    b = run(SearchConfig(p=0.1, max_iter=300, seed=5), stub(), keep_vectors=True)
    assert [(h.te, h.accepted, h.best, h.status) for h in a.history] == \
           [(h.te, h.accepted, h.best, h.status) for h in b.history]
    np.testing.assert_array_equal(a.best_vector, b.best_vector)
    acc = [h.te for h in _accepted(a)]
    assert len(acc) > 3
    assert all(x < y for x, y in zip(acc[1:], acc))
    best = [h.best for h in a.history]
    assert all(x <= y for x, y in zip(best[1:], best))
    lo, hi, _ = variable_table(stub().domain)
    assert len(a.evaluated) == 301
    for v in a.evaluated:
        assert np.all((v >= lo) & (v <= hi))


def test_ties_are_rejected():
    class Flat(StubProblem):
        def evaluate(self, v):
            return EvalResult(1.0, "ok", check_vector(self.domain, v))

    dom = build_grid_domain(2, 2, 5.0, 7, 6, {5}, n_surfaces=4)
    res = run(SearchConfig(p=0.2, max_iter=20, seed=0), Flat(dom, None))
    assert [h.accepted for h in res.history] == [True] + [False] * 20
    np.testing.assert_array_equal(res.best_vector, initial_vector(dom))


def test_penalised_candidates_never_replace_a_finite_incumbent():
    res = run(SearchConfig(p=0.3, max_iter=300, seed=2), stub())
    statuses = {h.status for h in res.history}
    assert "invalid" in statuses
    for h in res.history[1:]:
        if h.te >= PENALTY:
            assert not h.accepted
    assert res.best_te < PENALTY


def test_zero_iterations_returns_the_initial_evaluation():
    p = stub()
    res = run(SearchConfig(max_iter=0), p)
    assert len(res.history) == 1
    assert res.best_te == p.evaluate(initial_vector(p.domain)).te
    np.testing.assert_array_equal(res.best_vector, initial_vector(p.domain))


def test_threshold_stops_early():
    p = stub()
    goal = 0.9 * p.evaluate(initial_vector(p.domain)).te
    res = run(SearchConfig(p=0.1, max_iter=1000, seed=5, threshold=goal), p)
    assert res.best_te <= goal
    assert len(res.history) - 1 < 1000
    assert all(h.best > goal for h in res.history[:-1])


def test_parallel_first_improvement_is_deterministic():
    a = run(SearchConfig(p=0.1, max_iter=40, seed=9, workers=2), stub())
    b = run(SearchConfig(p=0.1, max_iter=40, seed=9, workers=2), stub())
    assert [h.te for h in a.history] == [h.te for h in b.history]
    acc = [h.te for h in _accepted(a)]
    assert all(x < y for x, y in zip(acc[1:], acc))


def test_all_flags_off_is_penalised():
    dom, v = beam_domain()
    lo, hi, kind = variable_table(dom)
    v = v.copy()
    v[kind == KIND_FLAG] = 0
    curve = np.column_stack([np.linspace(0, 10, 30), np.sin(np.linspace(0, 2, 30))])
    p = Problem(dom, describe_path(curve))
    r = p.evaluate(v)
    assert r.te == PENALTY and r.status != "ok"


def test_valid_cantilever_has_finite_error_against_curved_path():
    dom, v = beam_domain()
    curve = np.column_stack([np.linspace(0, 10, 30), 3 * np.sin(np.linspace(0, 2, 30))])
    p = Problem(dom, describe_path(curve), settings=AnalysisSettings(n_el=8, n_ew=2, n_steps=4))
    r = p.evaluate(v)
    assert r.status == "ok"
    assert 0 < r.te < PENALTY and math.isfinite(r.te)


def test_short_real_run_is_bit_identical():
    cfg = shipped("toy_single_kink")
    problem = problem_from_config(cfg)
    sc = search_config_from(cfg, seed=1, max_iter=6)
    a = run(sc, problem, v0=cfg.design_vector())
    b = run(sc, problem, v0=cfg.design_vector())
    assert [(h.te, h.accepted, h.status) for h in a.history] == [(h.te, h.accepted, h.status) for h in b.history]
    assert a.history[0].te == pytest.approx(41.2967, abs=1e-3)
    assert cfg.threshold == pytest.approx(0.1 * a.history[0].te, abs=1e-4)


def test_history_log_csv(tmp_path):
    res = run(SearchConfig(p=0.1, max_iter=10, seed=0), stub())
    res.write_log(tmp_path / "h.csv")
    rows = (tmp_path / "h.csv").read_text().splitlines()
    assert rows[0] == "iteration,T_e,accepted,best,status"
    assert len(rows) == 12
