"""Command line entry point: ``ccmsynth <verb> --config FILE [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .deck import deck_for, validate_deck
from .errors import CCMError, ConfigError, ExportError, ObjectiveError
from .objective import describe_path, error_terms, path_length, total_error
from .pipeline import analyze, material_for, prepare
from .render import write_frames, write_path_csv
from .scenarios import find_scenario, run_scenario
from .search import problem_from_config, run, search_config_from

log = logging.getLogger("ccmsynth")


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(), "logger": record.name, "message": record.getMessage()})


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("UsageError", message)
        sys.exit(2)


def _emit_error(kind: str, message: str, **extra) -> None:
    sys.stderr.write(json.dumps({"level": "error", "error": kind, "message": message, **extra}) + "\n")


def _load(arg: str) -> cfgmod.JobConfig:
    p = Path(arg)
    if p.is_file():
        return cfgmod.load_config(p)
    if arg in cfgmod.shipped_names():
        return cfgmod.shipped(arg)
    raise ConfigError(f"no configuration file or bundled configuration named {arg!r}")


def _outdir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {out}: {exc}", out) from exc
    return out


def _print(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def _analysis_summary(cfg, an) -> dict:
    out = {"elements": an.prepared.mesh.n_elements, "nodes": an.prepared.mesh.n_nodes,
           "loops": len(an.prepared.loops), "surfaces": [s.id for s in an.prepared.surfaces],
           "force_n": an.force, "steps": len(an.result.steps) - 1,
           "endpoint_mm": an.path[-1].tolist(), "path_length_mm": path_length(an.path)}
    if cfg.desired_path_mm:
        try:
            d = describe_path(an.path, cfg.n_coeffs, cfg.samples, cfg.ribbon_fraction)
        except ObjectiveError as exc:
            out["te"] = None
            out["objective_error"] = str(exc)
            return out
        out["te"] = total_error(cfg.desired(), d, cfg.weights)
        out["terms"] = error_terms(cfg.desired(), d)
    return out


# ---------------------------------------------------------------------------
# verbs


def cmd_synth(args) -> int:
    cfg = _load(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    problem = problem_from_config(cfg)
    sc = search_config_from(cfg, seed=args.seed, max_iter=args.max_iter)
    out = _outdir(args)
    t0 = time.perf_counter()

    def progress(rec):
        if rec.accepted:
            log.info("iteration %d: T_e %.6g (%s)", rec.iteration, rec.te, rec.status)

    v0 = cfg.design_vector() if cfg.design is not None else None
    res = run(sc, problem, v0=v0, callback=progress)
    res.write_log(out / "history.csv")
    best = replace(cfg, design=tuple(float(x) for x in res.best_vector))
    cfgmod.dump_config(best, out / "best.toml")
    summary = {"best_te": res.best_te, "initial_te": res.history[0].te, "iterations": len(res.history) - 1,
               "accepted": sum(1 for h in res.history if h.accepted) - 1, "seed": sc.seed,
               "seconds": time.perf_counter() - t0, "best_config": str(out / "best.toml")}
    ev = problem.evaluate(res.best_vector)
    if ev.path is not None:
        write_path_csv(ev.path, out / "best_path.csv")
    _print(summary)
    return 0


def _settings(cfg, args):
    s = cfg.settings
    if getattr(args, "mu", None) is not None:
        s = replace(s, mu=args.mu)
    return s


def cmd_analyze(args) -> int:
    cfg = _load(args.config)
    s = _settings(cfg, args)
    prep = prepare(cfg.domain(), cfg.design_vector(), s)
    an = analyze(prep, material_for(prep, cfg.E, cfg.nu), s, force=args.force)
    summary = _analysis_summary(cfg, an)
    if args.out:
        out = _outdir(args)
        write_path_csv(an.path, out / "path.csv")
        summary["path_csv"] = str(out / "path.csv")
    _print(summary)
    return 0


def cmd_scenario(args) -> int:
    cfg = _load(args.config)
    specs = list(cfg.scenarios) if args.name is None else [find_scenario(cfg, args.name)]
    if not specs:
        raise ConfigError("configuration defines no scenarios")
    reports = []
    for spec in specs:
        log.info("running %s scenario %r", spec.kind, spec.name)
        reports.append(run_scenario(cfg, spec).to_dict())
    if args.out:
        out = _outdir(args)
        (out / "scenarios.json").write_text(json.dumps(reports, indent=2, default=_jsonable))
    _print(reports)
    return 0


def cmd_export_deck(args) -> int:
    cfg = _load(args.config)
    s = _settings(cfg, args)
    prep = prepare(cfg.domain(), cfg.design_vector(), s)
    text = deck_for(prep, material_for(prep, cfg.E, cfg.nu), s)
    summary = validate_deck(text)
    target = Path(args.out)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)
    except OSError as exc:
        raise ExportError(f"cannot write {target}: {exc}", target) from exc
    _print({"deck": str(target), "nodes": summary.n_nodes, "elements": summary.n_elements,
            "surfaces": summary.surfaces, "contact_pairs": len(summary.pairs), "lines": summary.n_lines})
    return 0


def cmd_render(args) -> int:
    cfg = _load(args.config)
    s = _settings(cfg, args)
    prep = prepare(cfg.domain(), cfg.design_vector(), s)
    an = analyze(prep, material_for(prep, cfg.E, cfg.nu), s, force=args.force)
    out = _outdir(args)
    desired = np.array(cfg.desired_path_mm) if cfg.desired_path_mm else None
    frames = write_frames(an, out, desired, cfg.obstacles, cfg.pad, every=args.every)
    write_path_csv(an.path, out / "path.csv")
    _print({"frames": len(frames), "directory": str(out), "path_csv": str(out / "path.csv")})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ccmsynth", description="Synthesis and analysis of contact-aided compliant mechanisms.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(sp, out_required=False, out_help="output directory"):
        sp.add_argument("--config", "-c", required=True, help="TOML job file or bundled configuration name")
        sp.add_argument("--out", "-o", required=out_required, default=None, help=out_help)

    sp = sub.add_parser("synth", help="run the hill-climbing synthesis")
    common(sp)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--max-iter", type=int, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_synth, out="synth-out")

    sp = sub.add_parser("analyze", help="analyse the configured design")
    common(sp)
    sp.add_argument("--force", type=float, default=None, help="override the input force (N)")
    sp.add_argument("--mu", type=float, default=None, help="override the friction coefficient")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("scenario", help="run post-synthesis studies")
    common(sp)
    sp.add_argument("--name", default=None, help="scenario name or kind (default: all)")
    sp.set_defaults(func=cmd_scenario)

    sp = sub.add_parser("export-deck", help="write the solver input deck")
    common(sp, out_required=True, out_help="deck file")
    sp.add_argument("--mu", type=float, default=None)
    sp.set_defaults(func=cmd_export_deck)

    sp = sub.add_parser("render", help="write SVG frames and the path CSV")
    common(sp, out_required=True)
    sp.add_argument("--force", type=float, default=None)
    sp.add_argument("--mu", type=float, default=None)
    sp.add_argument("--every", type=int, default=1, help="write every k-th step")
    sp.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter())
    root = logging.getLogger("ccmsynth")
    root.handlers[:] = [handler]
    root.setLevel(logging.WARNING - 10 * min(args.verbose, 2))
    root.propagate = False
    try:
        return args.func(args)
    except CCMError as exc:
        extra = {"path": str(exc.path)} if getattr(exc, "path", None) is not None else {}
        _emit_error(type(exc).__name__, str(exc), **extra)
        return 1
    except OSError as exc:
        _emit_error("OSError", str(exc), path=str(exc.filename) if exc.filename else None)
        return 1


if __name__ == "__main__":
    sys.exit(main())
