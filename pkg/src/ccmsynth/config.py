"""Job configuration: TOML files with explicit units in key names.

``load_config``/``dump_config`` round-trip through a canonical dict form, so
writing a loaded configuration reproduces the same text.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .domain import Bounds, DesignDomain, build_grid_domain, check_vector, initial_vector
from .errors import ConfigError
from .fem import Material
from .objective import N_COEFFS, N_SAMPLES, RIBBON_FRACTION, Weights, describe_path
from .pipeline import AnalysisSettings

SCENARIO_KINDS = ("wrong-key", "friction-sweep", "wear-sweep", "mesh-density")


@dataclass(frozen=True)
class Circle:
    center: tuple       # mm
    radius: float       # mm

    def contains(self, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.linalg.norm(p - np.asarray(self.center), axis=1) <= self.radius


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    name: str = ""
    cases: tuple = ()               # wrong-key: ({"remove": [...], "rotate": [...]}, ...)
    mu: tuple = ()                  # friction sweep
    wear_percent: tuple = ()        # wear sweep
    wear_mu: float = 0.0
    meshes: tuple = ()              # ((n_ew, n_el), ...)
    force_range: tuple = (0.0, 10.0)   # N, bisection bracket
    force_tol: float = 0.01         # N
    rotate_rad: float = 1.0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")


@dataclass
class JobConfig:
    nx: int
    ny: int
    block_size_cm: float
    input_port: int
    output_port: int
    fixed: tuple
    n_surfaces: int = 0
    surface_centers_cm: tuple | None = None
    bounds: Bounds = field(default_factory=Bounds)
    E: float = 20.0
    nu: float = 0.33
    settings: AnalysisSettings = field(default_factory=AnalysisSettings)
    weights: Weights = field(default_factory=Weights)
    n_coeffs: int = N_COEFFS
    samples: int = N_SAMPLES
    ribbon_fraction: float = RIBBON_FRACTION
    desired_path_mm: tuple = ()
    mutation_probability: float = 0.08
    max_iterations: int = 1000
    seed: int = 0
    threshold: float | None = None
    workers: int = 1
    design: tuple | None = None
    pad: Circle | None = None
    obstacles: tuple = ()
    scenarios: tuple = ()
    name: str = ""

    def __post_init__(self):
        if not 0.0 < self.mutation_probability <= 1.0:
            raise ConfigError("mutation probability must lie in (0, 1]")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be >= 0")
        if self.desired_path_mm and len(self.desired_path_mm) < 2:
            raise ConfigError("desired path needs at least two waypoints")

    # -- derived objects --------------------------------------------------

    def domain(self) -> DesignDomain:
        centers = None if self.surface_centers_cm is None else np.array(self.surface_centers_cm, dtype=float)
        return build_grid_domain(self.nx, self.ny, self.block_size_cm, self.input_port, self.output_port,
                                 set(self.fixed), self.n_surfaces, centers, self.bounds)

    def material(self, thickness: float) -> Material:
        return Material(self.E, self.nu, thickness)

    def desired(self):
        if not self.desired_path_mm:
            raise ConfigError("configuration has no desired path")
        return describe_path(np.array(self.desired_path_mm, dtype=float), self.n_coeffs, self.samples,
                             self.ribbon_fraction)

    def design_vector(self) -> np.ndarray:
        dom = self.domain()
        if self.design is None:
            return initial_vector(dom)
        return check_vector(dom, np.array(self.design, dtype=float))


# ---------------------------------------------------------------------------
# dict <-> dataclass

_BOUND_KEYS = {
    "slope": "slope_rad", "width": "width_mm", "thickness": "thickness_mm", "offset": "offset_mm",
    "center_x": "center_x_cm", "center_y": "center_y_cm", "radius": "radius_cm", "factor": "factor",
    "theta": "theta_rad", "force": "force_n",
}


def _pairs(x):
    return [[float(a), float(b)] for a, b in x]


def to_dict(cfg: JobConfig) -> dict:
    d: dict = {}
    if cfg.name:
        d["name"] = cfg.name
    dom = {"nx": cfg.nx, "ny": cfg.ny, "block_size_cm": float(cfg.block_size_cm),
           "input_port": cfg.input_port, "output_port": cfg.output_port,
           "fixed": sorted(int(f) for f in cfg.fixed), "n_surfaces": cfg.n_surfaces}
    if cfg.surface_centers_cm is not None:
        dom["surface_centers_cm"] = _pairs(cfg.surface_centers_cm)
    d["domain"] = dom
    b = {}
    for attr, key in _BOUND_KEYS.items():
        val = getattr(cfg.bounds, attr)
        if val is not None:
            b[key] = [float(val[0]), float(val[1])]
    d["bounds"] = b
    d["material"] = {"youngs_modulus_n_per_mm2": float(cfg.E), "poisson_ratio": float(cfg.nu)}
    s = cfg.settings
    d["analysis"] = {"n_el": s.n_el, "n_ew": s.n_ew, "n_steps": s.n_steps,
                     "force_direction": [float(s.direction[0]), float(s.direction[1])],
                     "friction_mu": float(s.mu), "self_contact": bool(s.self_contact),
                     "formulation": s.formulation, "junction_compression": float(s.compression)}
    w = cfg.weights
    obj = {"weight_alpha_per_rad2": float(w.alpha), "weight_beta_per_rad2": float(w.beta),
           "weight_length_per_mm2": float(w.length), "weight_theta_per_rad2": float(w.theta),
           "n_coeffs": cfg.n_coeffs, "samples": cfg.samples, "ribbon_fraction": float(cfg.ribbon_fraction)}
    if cfg.desired_path_mm:
        obj["desired_path_mm"] = _pairs(cfg.desired_path_mm)
    d["objective"] = obj
    srch = {"mutation_probability": float(cfg.mutation_probability), "max_iterations": cfg.max_iterations,
            "seed": cfg.seed, "workers": cfg.workers}
    if cfg.threshold is not None:
        srch["threshold"] = float(cfg.threshold)
    d["search"] = srch
    if cfg.design is not None:
        d["design"] = {"vector": [float(x) for x in cfg.design]}
    if cfg.pad is not None:
        d["pad"] = {"center_mm": [float(c) for c in cfg.pad.center], "radius_mm": float(cfg.pad.radius)}
    if cfg.obstacles:
        d["obstacle"] = [{"center_mm": [float(c) for c in o.center], "radius_mm": float(o.radius)}
                         for o in cfg.obstacles]
    if cfg.scenarios:
        d["scenario"] = [_scenario_dict(sc) for sc in cfg.scenarios]
    return d


def _scenario_dict(sc: ScenarioSpec) -> dict:
    out: dict = {"kind": sc.kind}
    if sc.name:
        out["name"] = sc.name
    if sc.kind == "wrong-key":
        out["rotate_rad"] = float(sc.rotate_rad)
        out["case"] = [{"remove": [int(i) for i in c.get("remove", ())],
                        "rotate": [int(i) for i in c.get("rotate", ())]} for c in sc.cases]
    elif sc.kind == "friction-sweep":
        out["mu"] = [float(m) for m in sc.mu]
        out["force_range_n"] = [float(sc.force_range[0]), float(sc.force_range[1])]
        out["force_tol_n"] = float(sc.force_tol)
    elif sc.kind == "wear-sweep":
        out["wear_percent"] = [float(x) for x in sc.wear_percent]
        out["friction_mu"] = float(sc.wear_mu)
    else:
        out["meshes"] = [[int(a), int(b)] for a, b in sc.meshes]
    return out


def _get(d: dict, key: str, default=None, required: bool = False):
    if key in d:
        return d[key]
    if required:
        raise ConfigError(f"missing required key {key!r}")
    return default


def from_dict(d: dict) -> JobConfig:
    try:
        dom = _get(d, "domain", required=True)
        b = d.get("bounds", {})
        unknown = set(b) - set(_BOUND_KEYS.values())
        if unknown:
            raise ConfigError(f"unknown bound keys {sorted(unknown)}")
        bkw = {attr: tuple(b[key]) for attr, key in _BOUND_KEYS.items() if key in b}
        bounds = Bounds(**bkw)
        mat = d.get("material", {})
        an = d.get("analysis", {})
        defaults = AnalysisSettings()
        settings = AnalysisSettings(
            n_el=int(an.get("n_el", defaults.n_el)), n_ew=int(an.get("n_ew", defaults.n_ew)),
            n_steps=int(an.get("n_steps", defaults.n_steps)),
            direction=tuple(float(x) for x in an.get("force_direction", defaults.direction)),
            mu=float(an.get("friction_mu", defaults.mu)),
            self_contact=bool(an.get("self_contact", defaults.self_contact)),
            formulation=str(an.get("formulation", defaults.formulation)),
            compression=float(an.get("junction_compression", defaults.compression)))
        obj = d.get("objective", {})
        weights = Weights(float(obj.get("weight_alpha_per_rad2", 100.0)), float(obj.get("weight_beta_per_rad2", 100.0)),
                          float(obj.get("weight_length_per_mm2", 0.1)), float(obj.get("weight_theta_per_rad2", 0.0)))
        srch = d.get("search", {})
        design = d.get("design", {}).get("vector")
        pad = d.get("pad")
        cfg = JobConfig(
            nx=int(_get(dom, "nx", required=True)), ny=int(_get(dom, "ny", required=True)),
            block_size_cm=float(_get(dom, "block_size_cm", required=True)),
            input_port=int(_get(dom, "input_port", required=True)),
            output_port=int(_get(dom, "output_port", required=True)),
            fixed=tuple(int(f) for f in _get(dom, "fixed", required=True)),
            n_surfaces=int(dom.get("n_surfaces", 0)),
            surface_centers_cm=(tuple(tuple(c) for c in dom["surface_centers_cm"])
                                if "surface_centers_cm" in dom else None),
            bounds=bounds,
            E=float(mat.get("youngs_modulus_n_per_mm2", 20.0)), nu=float(mat.get("poisson_ratio", 0.33)),
            settings=settings, weights=weights,
            n_coeffs=int(obj.get("n_coeffs", N_COEFFS)), samples=int(obj.get("samples", N_SAMPLES)),
            ribbon_fraction=float(obj.get("ribbon_fraction", RIBBON_FRACTION)),
            desired_path_mm=tuple(tuple(p) for p in obj.get("desired_path_mm", ())),
            mutation_probability=float(srch.get("mutation_probability", 0.08)),
            max_iterations=int(srch.get("max_iterations", 1000)), seed=int(srch.get("seed", 0)),
            threshold=(float(srch["threshold"]) if "threshold" in srch else None),
            workers=int(srch.get("workers", 1)),
            design=tuple(float(x) for x in design) if design is not None else None,
            pad=Circle(tuple(pad["center_mm"]), float(pad["radius_mm"])) if pad else None,
            obstacles=tuple(Circle(tuple(o["center_mm"]), float(o["radius_mm"])) for o in d.get("obstacle", ())),
            scenarios=tuple(_scenario_from(s) for s in d.get("scenario", ())),
            name=str(d.get("name", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    cfg.domain()  # validates ports and supports
    return cfg


def _scenario_from(s: dict) -> ScenarioSpec:
    kind = s.get("kind")
    return ScenarioSpec(
        kind=kind, name=str(s.get("name", "")),
        cases=tuple({"remove": tuple(c.get("remove", ())), "rotate": tuple(c.get("rotate", ()))}
                    for c in s.get("case", ())),
        mu=tuple(float(m) for m in s.get("mu", ())),
        wear_percent=tuple(float(x) for x in s.get("wear_percent", ())),
        wear_mu=float(s.get("friction_mu", 0.0)),
        meshes=tuple((int(a), int(b)) for a, b in s.get("meshes", ())),
        force_range=tuple(float(x) for x in s.get("force_range_n", (0.0, 10.0))),
        force_tol=float(s.get("force_tol_n", 0.01)),
        rotate_rad=float(s.get("rotate_rad", 1.0)),
    )


def loads(text: str) -> JobConfig:
    try:
        return from_dict(tomli.loads(text))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}") from exc


def dumps(cfg: JobConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def load_config(path) -> JobConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    return loads(text)


def dump_config(cfg: JobConfig, path) -> None:
    Path(path).write_text(dumps(cfg))


def shipped(name: str) -> JobConfig:
    """Load one of the configurations bundled with the package (without the .toml suffix)."""
    res = resources.files("ccmsynth") / "data" / f"{name}.toml"
    if not res.is_file():
        raise ConfigError(f"no bundled configuration named {name!r}")
    return loads(res.read_text())


def shipped_names() -> list:
    return sorted(p.name[:-5] for p in (resources.files("ccmsynth") / "data").iterdir() if p.name.endswith(".toml"))


__all__ = ["Circle", "ScenarioSpec", "JobConfig", "to_dict", "from_dict", "loads", "dumps",
           "load_config", "dump_config", "shipped", "shipped_names", "SCENARIO_KINDS"]
