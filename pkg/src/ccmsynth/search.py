"""Random-mutation hill climber over the mixed design vector."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import KIND_CONT, KIND_FLAG, KIND_SHAPE, DesignDomain, check_vector, initial_vector, variable_table
from .errors import CCMError, ObjectiveError
from .fem import Material
from .objective import PENALTY, FsDescriptor, Weights, describe_path, error_terms, total_error
from .pipeline import AnalysisSettings, analyze, repaired_vector, safe_prepare

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    p: float = 0.08
    max_iter: int = 1000
    seed: int = 0
    threshold: float | None = None
    workers: int = 1      # >1 evaluates that many mutants per round, first improvement wins

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("mutation probability must lie in (0, 1]")


@dataclass
class IterationRecord:
    iteration: int
    te: float
    accepted: bool
    best: float
    status: str


@dataclass
class EvalResult:
    te: float
    status: str
    vector: np.ndarray                  # repaired vector (flags of removed parts cleared)
    terms: dict | None = None
    path: np.ndarray | None = None


@dataclass
class SearchResult:
    best_vector: np.ndarray
    best_te: float
    history: list
    evaluated: list = field(default_factory=list)

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "T_e", "accepted", "best", "status"])
            for r in self.history:
                w.writerow([r.iteration, repr(r.te), int(r.accepted), repr(r.best), r.status])


def mutate(v, p: float, rng: np.random.Generator, lo, hi, kind) -> np.ndarray:
    """Mutate each gene independently with probability ``p``.

    Flags flip, shapes are redrawn from {1, 2, 3}, continuous genes are redrawn
    uniformly within bounds.  The generator is advanced by the same amount
    regardless of ``p`` so runs stay aligned across settings.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    hit = rng.random(n) < p
    cont = rng.uniform(0.0, 1.0, n)
    shape = rng.integers(1, 4, n)
    out = v.copy()
    m = hit & (kind == KIND_CONT)
    out[m] = lo[m] + cont[m] * (hi[m] - lo[m])
    m = hit & (kind == KIND_FLAG)
    out[m] = 1.0 - out[m]
    m = hit & (kind == KIND_SHAPE)
    out[m] = shape[m]
    return out


@dataclass
class Problem:
    """Everything needed to score a design vector."""

    domain: DesignDomain
    desired: FsDescriptor
    weights: Weights = field(default_factory=Weights)
    settings: AnalysisSettings = field(default_factory=AnalysisSettings)
    E: float = 20.0
    nu: float = 0.33
    samples: int = 1024
    ribbon_fraction: float = 0.01

    def evaluate(self, v) -> EvalResult:
        v = check_vector(self.domain, v)
        prep, status = safe_prepare(self.domain, v, self.settings)
        if prep is None:
            return EvalResult(PENALTY, status, v)
        vr = repaired_vector(self.domain, v, prep)
        try:
            an = analyze(prep, Material(self.E, self.nu, prep.topology.thickness), self.settings)
        except CCMError as exc:
            log.debug("analysis failed: %s", exc)
            return EvalResult(PENALTY, "solver:" + type(exc).__name__, vr)
        try:
            desc = describe_path(an.path, self.desired.n, self.samples, self.ribbon_fraction)
        except ObjectiveError as exc:
            return EvalResult(PENALTY, "objective:" + str(exc), vr, path=an.path)
        te = total_error(self.desired, desc, self.weights)
        if not math.isfinite(te):
            return EvalResult(PENALTY, "objective:non-finite", vr, path=an.path)
        return EvalResult(min(te, PENALTY), "ok", vr, error_terms(self.desired, desc), an.path)


def _eval(args):
    problem, v = args
    return problem.evaluate(v)


def run(config: SearchConfig, problem: Problem, v0=None, keep_vectors: bool = False,
        callback=None) -> SearchResult:
    """Classic hill climber: mutate the incumbent, accept only strict improvements."""
    dom = problem.domain
    lo, hi, kind = variable_table(dom)
    rng = np.random.default_rng(config.seed)
    v = initial_vector(dom) if v0 is None else check_vector(dom, v0)
    first = problem.evaluate(v)
    best_v, best_te = first.vector, first.te
    history = [IterationRecord(0, first.te, True, best_te, first.status)]
    evaluated = [v.copy()] if keep_vectors else []
    if callback:
        callback(history[-1])

    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        it = 0
        while it < config.max_iter:
            if config.threshold is not None and best_te <= config.threshold:
                break
            k = min(max(config.workers, 1), config.max_iter - it)
            cands = [mutate(best_v, config.p, rng, lo, hi, kind) for _ in range(k)]
            if pool is None:
                results = [problem.evaluate(c) for c in cands]
            else:
                results = list(pool.map(_eval, [(problem, c) for c in cands]))
            accepted_one = False
            for c, r in zip(cands, results):
                it += 1
                acc = (not accepted_one) and r.te < best_te
                if acc:
                    best_v, best_te = r.vector, r.te
                    accepted_one = True
                history.append(IterationRecord(it, r.te, acc, best_te, r.status))
                if keep_vectors:
                    evaluated.append(c)
                if callback:
                    callback(history[-1])
    finally:
        if pool is not None:
            pool.shutdown()
    return SearchResult(best_v, best_te, history, evaluated)


def problem_from_config(cfg) -> Problem:
    return Problem(cfg.domain(), cfg.desired(), cfg.weights, cfg.settings, cfg.E, cfg.nu,
                   cfg.samples, cfg.ribbon_fraction)


def search_config_from(cfg, seed: int | None = None, max_iter: int | None = None) -> SearchConfig:
    return SearchConfig(cfg.mutation_probability, cfg.max_iterations if max_iter is None else max_iter,
                        cfg.seed if seed is None else seed, cfg.threshold, cfg.workers)


__all__ = ["SearchConfig", "IterationRecord", "EvalResult", "SearchResult", "Problem", "mutate", "run",
           "problem_from_config", "search_config_from"]
