"""Result artifacts: path CSV files and SVG frames of the deformed mechanism."""
from __future__ import annotations

import csv
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from .errors import ExportError

SVG_NS = "http://www.w3.org/2000/svg"


def write_path_csv(path, target) -> Path:
    """One row per converged step (step 0 is the undeformed position)."""
    p = Path(target)
    try:
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "x_mm", "y_mm"])
            for k, (x, y) in enumerate(np.asarray(path, dtype=float)):
                w.writerow([k, repr(float(x)), repr(float(y))])
    except OSError as exc:
        raise ExportError(f"cannot write {p}: {exc}", p) from exc
    return p


def _points(xy) -> str:
    return " ".join(f"{x:.4f},{y:.4f}" for x, y in xy)


def svg_frame(outlines, deformed=(), surfaces=(), desired=None, actual=None, obstacles=(),
              pad=None, margin: float = 10.0) -> str:
    """SVG text: undeformed outlines grey, deformed red, rigid surfaces filled, paths as polylines.

    All geometry is in mm with y up; the drawing flips y so it reads like a plot.
    """
    groups = [np.asarray(o, dtype=float) for o in list(outlines) + list(deformed) + list(surfaces)]
    for extra in (desired, actual):
        if extra is not None and len(extra):
            groups.append(np.asarray(extra, dtype=float))
    for ob in obstacles:
        c = np.asarray(ob.center)
        groups.append(np.array([c - ob.radius, c + ob.radius]))
    if pad is not None:
        c = np.asarray(pad.center)
        groups.append(np.array([c - pad.radius, c + pad.radius]))
    allp = np.vstack(groups) if groups else np.zeros((1, 2))
    lo = allp.min(axis=0) - margin
    hi = allp.max(axis=0) + margin
    w, h = hi - lo
    root = ET.Element("svg", {"xmlns": SVG_NS, "version": "1.1", "width": f"{4 * w:.1f}", "height": f"{4 * h:.1f}",
                              "viewBox": f"{lo[0]:.4f} {-hi[1]:.4f} {w:.4f} {h:.4f}"})
    g = ET.SubElement(root, "g", {"transform": "scale(1,-1)", "stroke-linejoin": "round"})
    for s in surfaces:
        ET.SubElement(g, "polygon", {"points": _points(s), "fill": "#9ab", "stroke": "#345", "stroke-width": "0.3"})
    for ob in obstacles:
        ET.SubElement(g, "circle", {"cx": f"{ob.center[0]:.4f}", "cy": f"{ob.center[1]:.4f}",
                                    "r": f"{ob.radius:.4f}", "fill": "none", "stroke": "#c80",
                                    "stroke-dasharray": "1,1", "stroke-width": "0.3"})
    if pad is not None:
        ET.SubElement(g, "circle", {"cx": f"{pad.center[0]:.4f}", "cy": f"{pad.center[1]:.4f}",
                                    "r": f"{pad.radius:.4f}", "fill": "#2a2", "fill-opacity": "0.3",
                                    "stroke": "#2a2", "stroke-width": "0.3"})
    for o in outlines:
        ET.SubElement(g, "polygon", {"points": _points(o), "fill": "none", "stroke": "#999", "stroke-width": "0.3"})
    for o in deformed:
        ET.SubElement(g, "polygon", {"points": _points(o), "fill": "none", "stroke": "#d22", "stroke-width": "0.3"})
    if desired is not None and len(desired) > 1:
        ET.SubElement(g, "polyline", {"points": _points(desired), "fill": "none", "stroke": "#23c",
                                      "stroke-width": "0.4", "stroke-dasharray": "1.5,1"})
    if actual is not None and len(actual) > 1:
        ET.SubElement(g, "polyline", {"points": _points(actual), "fill": "none", "stroke": "#000",
                                      "stroke-width": "0.4"})
    return ET.tostring(root, encoding="unicode", xml_declaration=True)


def analysis_frames(an, desired=None, obstacles=(), pad=None, every: int = 1, align_desired: bool = True):
    """Yield (step index, SVG text) for the converged steps of an analysis."""
    prep = an.prepared
    X = prep.mesh.nodes
    outlines = [X[lp.nodes] for lp in prep.loops]
    surfaces = [s.shape.boundary for s in prep.surfaces]
    path = an.path
    d = None
    if desired is not None and len(desired):
        d = np.asarray(desired, dtype=float)
        if align_desired:
            d = d - d[0] + path[0]
    steps = an.result.steps
    for k in range(0, len(steps), max(1, every)):
        x = X + steps[k].u.reshape(-1, 2)
        deformed = [x[lp.nodes] for lp in prep.loops]
        yield k, svg_frame(outlines, deformed, surfaces, d, path[:k + 1], obstacles, pad)


def write_frames(an, outdir, desired=None, obstacles=(), pad=None, every: int = 1, prefix: str = "frame") -> list:
    out = Path(outdir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for k, svg in analysis_frames(an, desired, obstacles, pad, every):
            p = out / f"{prefix}_{k:04d}.svg"
            p.write_text(svg)
            written.append(p)
    except OSError as exc:
        raise ExportError(f"cannot write frames to {out}: {exc}", out) from exc
    return written


__all__ = ["write_path_csv", "svg_frame", "analysis_frames", "write_frames"]
