"""Fourier shape descriptors of output paths and the weighted path error.

An open path is first closed into a thin ribbon (forward along one lateral
offset, back along the other) so that desired and traced paths become simple
counter-clockwise polygons built by the same rule.  The descriptor is the
Zahn-Roskies normalised turning function of that polygon, resampled on a
uniform arc-length grid and expanded in a Fourier series.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ObjectiveError
from .geometry import polygon_is_simple, signed_area

PENALTY = 1.0e6
RIBBON_FRACTION = 0.01
N_SAMPLES = 1024
N_COEFFS = 100
_MITER_LIMIT = 4.0


@dataclass(frozen=True)
class Weights:
    alpha: float = 100.0    # 1/rad^2
    beta: float = 100.0     # 1/rad^2
    length: float = 0.1     # 1/mm^2
    theta: float = 0.0      # 1/rad^2

    def __post_init__(self):
        if min(self.alpha, self.beta, self.length, self.theta) < 0:
            raise ValueError("weights must be non-negative")


@dataclass(frozen=True)
class FsDescriptor:
    alpha: np.ndarray
    beta: np.ndarray
    length: float
    theta: float

    @property
    def n(self) -> int:
        return len(self.alpha)


def _distinct(path) -> np.ndarray:
    p = np.asarray(path, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2 or not np.all(np.isfinite(p)):
        raise ObjectiveError("path must be a finite (n, 2) array")
    if len(p) == 0:
        raise ObjectiveError("empty path")
    scale = max(float(np.abs(p).max()), 1.0)
    keep = [0]
    for i in range(1, len(p)):
        if np.linalg.norm(p[i] - p[keep[-1]]) > 1e-12 * scale:
            keep.append(i)
    q = p[keep]
    if len(q) < 2:
        raise ObjectiveError("path has fewer than two distinct points")
    return q


def path_length(path) -> float:
    p = np.asarray(path, dtype=float)
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum()) if len(p) > 1 else 0.0


def _offsets(p: np.ndarray, delta: float) -> np.ndarray:
    """Left-hand miter offsets of every path vertex."""
    d = np.diff(p, axis=0)
    t = d / np.linalg.norm(d, axis=1)[:, None]
    nrm = np.column_stack([-t[:, 1], t[:, 0]])
    off = np.empty_like(p)
    off[0] = nrm[0]
    off[-1] = nrm[-1]
    for i in range(1, len(p) - 1):
        a, b = nrm[i - 1], nrm[i]
        m = a + b
        c = 1.0 + float(a @ b)
        if c < 1e-12:
            off[i] = a
            continue
        m = m / c
        ln = np.linalg.norm(m)
        if ln > _MITER_LIMIT:
            m *= _MITER_LIMIT / ln
        off[i] = m
    return delta * off


def close_curve(path, fraction: float = RIBBON_FRACTION) -> np.ndarray:
    """Close an open path into a simple counter-clockwise polygon.

    Primary rule: a ribbon of half-width ``fraction * length`` around the path.
    Fallback: the path closed by its end-to-start chord (reoriented CCW).
    """
    p = _distinct(path)
    L = path_length(p)
    off = _offsets(p, fraction * L)
    ribbon = np.vstack([p - off, (p + off)[::-1]])
    if polygon_is_simple(ribbon) and signed_area(ribbon) > 0:
        return ribbon
    chord = p if signed_area(p) >= 0 else p[::-1]
    if len(chord) >= 3 and abs(signed_area(chord)) > 0 and polygon_is_simple(chord):
        return chord
    raise ObjectiveError("path cannot be closed into a simple polygon")


def turning_function(polygon):
    """Edge lengths and cumulative turning angle of each edge relative to the first edge."""
    q = np.asarray(polygon, dtype=float)
    d = np.roll(q, -1, axis=0) - q
    ln = np.linalg.norm(d, axis=1)
    keep = ln > 0
    d, ln = d[keep], ln[keep]
    if ln.sum() <= 0:
        raise ObjectiveError("degenerate polygon")
    ang = np.arctan2(d[:, 1], d[:, 0])
    turn = np.diff(ang)
    turn = (turn + math.pi) % (2 * math.pi) - math.pi
    phi = np.concatenate([[0.0], np.cumsum(turn)])
    return ln, phi, float(ang[0])


def fsd(polygon, n: int = N_COEFFS, samples: int = N_SAMPLES) -> FsDescriptor:
    """Fourier coefficients of phi*(t) = phi(L t / 2 pi) - t on [0, 2 pi).

    The piecewise-constant turning function is averaged over ``samples`` equal
    arc-length cells (exact cell integrals), transformed by FFT and corrected
    for the cell-averaging filter.
    """
    if n < 1:
        raise ObjectiveError("coefficient count must be >= 1")
    if samples < 2 * n + 1:
        raise ObjectiveError("too few samples for the requested coefficient count")
    ln, phi, theta = turning_function(polygon)
    L = float(ln.sum())
    # cumulative integral of phi over normalised arc length, at edge breakpoints
    s = np.concatenate([[0.0], np.cumsum(ln)]) / L
    F = np.concatenate([[0.0], np.cumsum(phi * np.diff(s))])
    edges = np.linspace(0.0, 1.0, samples + 1)
    cell = np.diff(np.interp(edges, s, F)) * samples
    tc = 2 * math.pi * (np.arange(samples) + 0.5) / samples
    phistar = cell - tc
    c = np.fft.rfft(phistar) / samples
    k = np.arange(1, n + 1)
    # undo the half-cell shift of the sample centres and the box-filter attenuation
    c = c[1:n + 1] * np.exp(-1j * math.pi * k / samples) / np.sinc(k / samples)
    return FsDescriptor(2.0 * c.real, -2.0 * c.imag, L, theta)


def describe_path(path, n: int = N_COEFFS, samples: int = N_SAMPLES,
                  fraction: float = RIBBON_FRACTION) -> FsDescriptor:
    p = _distinct(path)
    desc = fsd(close_curve(p, fraction), n, samples)
    d = p[1] - p[0]
    return FsDescriptor(desc.alpha, desc.beta, desc.length, math.atan2(d[1], d[0]))


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def error_terms(desired: FsDescriptor, actual: FsDescriptor) -> dict:
    if desired.n != actual.n:
        raise ObjectiveError(f"coefficient counts differ: {desired.n} vs {actual.n}")
    return {
        "alpha": float(np.sum((desired.alpha - actual.alpha) ** 2)),
        "beta": float(np.sum((desired.beta - actual.beta) ** 2)),
        "length": (desired.length - actual.length) ** 2,
        "theta": _wrap(desired.theta - actual.theta) ** 2,
    }


def total_error(desired: FsDescriptor, actual: FsDescriptor, w: Weights = Weights()) -> float:
    e = error_terms(desired, actual)
    return w.alpha * e["alpha"] + w.beta * e["beta"] + w.length * e["length"] + w.theta * e["theta"]


def penalize(reason: str = "") -> float:
    return PENALTY
