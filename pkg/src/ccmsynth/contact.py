"""Node-to-segment contact with augmented-Lagrangian multipliers.

Targets are closed piecewise-linear chains oriented with the body (material
or rigid shape) on their left, so the outward normal is the right-hand normal
of each segment.  Followers are nodes; a follower in contact receives the
pressure ``p = max(0, lam - eps * g)`` times its tributary area along the
target normal.  Coulomb friction (regularised by a tangential penalty) is
available against rigid targets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .geometry import points_in_polygon

_ALPHA_TOL = 1e-9


# ---------------------------------------------------------------------------
# Geometric primitives


def closest_point(x, points, closed: bool = False):
    """Global closest point of ``x`` on a polyline.

    Returns (segment index, xi in [-1, 1], projected point, right-hand unit normal).
    """
    x = np.asarray(x, dtype=float)
    pts = np.asarray(points, dtype=float)
    a = pts if closed else pts[:-1]
    b = np.roll(pts, -1, axis=0) if closed else pts[1:]
    d = b - a
    ll = np.einsum("ij,ij->i", d, d)
    alpha = np.clip(np.einsum("ij,ij->i", x - a, d) / ll, 0.0, 1.0)
    proj = a + alpha[:, None] * d
    k = int(np.argmin(np.linalg.norm(proj - x, axis=1)))
    t = d[k] / math.sqrt(ll[k])
    return k, 2.0 * alpha[k] - 1.0, proj[k], np.array([t[1], -t[0]])


def normal_gap(x, xp, n) -> float:
    return float(np.dot(np.asarray(x, float) - np.asarray(xp, float), n))


def friction_traction(q_prev: float, k_t: float, slip: float, mu: float, p: float):
    """Return-mapped tangential traction (resisting, along +slip) and stick flag."""
    if mu <= 0.0 or p <= 0.0:
        return 0.0, False
    trial = q_prev + k_t * slip
    if abs(trial) <= mu * p:
        return trial, True
    return math.copysign(mu * p, trial), False


# ---------------------------------------------------------------------------
# Contact definitions


@dataclass
class ContactTarget:
    """Closed segment chain: node ids of a deformable loop, or fixed rigid points."""

    id: object
    nodes: np.ndarray | None = None
    points: np.ndarray | None = None
    sides: list | None = None       # (element, side) of each deformable segment
    closed: bool = True

    @property
    def rigid(self) -> bool:
        return self.points is not None

    def coords(self, x):
        return self.points if self.rigid else x[self.nodes]


@dataclass
class ContactPair:
    followers: np.ndarray           # node ids
    areas: np.ndarray               # tributary area per follower (mm^2)
    target: ContactTarget
    self_contact: bool = False
    own_chain: np.ndarray | None = None     # closed node chain the followers belong to
    chain_index: np.ndarray | None = None   # follower position in ``own_chain``
    follower_sides: list | None = None      # per follower: sides of its own loop
    mu: float = 0.0


@dataclass
class ContactParams:
    eps: float                      # penalty, N/mm^3
    g_tol: float                    # admissible penetration, mm
    depth: float                    # search depth for candidate segments, mm
    kt: float | None = None         # tangential penalty; defaults to eps
    opposing: float = -0.3


@dataclass
class _Hit:
    pair: int
    fi: int
    node: int
    seg: int
    alpha: float
    g: float
    p: float
    n: np.ndarray
    t: np.ndarray
    l: float
    a: int | None
    b: int | None
    s: float = 0.0


@dataclass
class ContactHandler:
    pairs: list
    params: ContactParams
    lam: dict = field(default_factory=dict)        # (pair, node) -> multiplier
    fric: dict = field(default_factory=dict)       # (pair, node) -> (q, s) committed
    _entry: dict = field(default_factory=dict)     # first-contact arc coordinate in this increment
    _hits: list = field(default_factory=list)
    history: list = field(default_factory=list)    # committed active keys per step
    committed_forces: np.ndarray | None = None

    # -- detection --------------------------------------------------------

    def _detect(self, x):
        hits = []
        for pi, pair in enumerate(self.pairs):
            hits.extend(self._detect_pair(pi, pair, x))
        return hits

    def _detect_pair(self, pi, pair, x):
        prm = self.params
        tgt = pair.target
        T = tgt.coords(x)
        A = T if tgt.closed else T[:-1]
        B = np.roll(T, -1, axis=0) if tgt.closed else T[1:]
        d = B - A
        l = np.linalg.norm(d, axis=1)
        t = d / l[:, None]
        n = np.column_stack([t[:, 1], -t[:, 0]])
        P = x[pair.followers]
        nf_all = len(P)
        lam_f = np.array([self.lam.get((pi, int(f)), 0.0) for f in pair.followers])

        # broad phase: (follower, segment) candidate pairs
        if tgt.rigid:
            fol = np.flatnonzero(points_in_polygon(P, T) | (lam_f > 0.0))
            fr = np.repeat(fol, len(A))
            sg = np.tile(np.arange(len(A)), len(fol))
            depth = np.inf
        else:
            depth = prm.depth
            tree = cKDTree(0.5 * (A + B))
            lists = tree.query_ball_point(P, depth + 0.5 * float(l.max()))
            cnt = np.fromiter((len(c) for c in lists), dtype=int, count=nf_all)
            fr = np.repeat(np.arange(nf_all), cnt)
            sg = np.fromiter((j for c in lists for j in c), dtype=int, count=int(cnt.sum()))
        if fr.size == 0:
            return []

        rel = P[fr] - A[sg]
        alpha = np.einsum("ij,ij->i", rel, t[sg]) / l[sg]
        g = np.einsum("ij,ij->i", rel, n[sg])
        ok = (alpha >= -_ALPHA_TOL) & (alpha <= 1 + _ALPHA_TOL) & (np.abs(g) <= depth)
        facing = None
        if pair.own_chain is not None:
            ci = pair.chain_index[fr]
            facing = np.einsum("ij,ij->i", _node_normals(x[pair.own_chain])[ci], n[sg])
            ok &= facing < prm.opposing
        if pair.self_contact:
            ns = len(T)
            gap = np.minimum((sg - ci) % ns, (ci - sg) % ns)
            ok &= (gap > 2) & (gap < ns - 3)
        fr, sg, alpha, g = fr[ok], sg[ok], alpha[ok], g[ok]
        if fr.size == 0:
            return []
        ag = np.abs(g)

        # closest segment per follower; near-ties go to the most opposed normal
        order = np.lexsort((ag, fr))
        first = np.ones(order.size, dtype=bool)
        first[1:] = fr[order][1:] != fr[order][:-1]
        gmin = np.empty(nf_all)
        gmin[fr[order][first]] = ag[order][first]
        if facing is not None:
            fac = facing[ok]
            near = ag <= gmin[fr] + 1e-9 * (1.0 + gmin[fr])
            order = np.lexsort((ag, fac, ~near, fr))
            first = np.ones(order.size, dtype=bool)
            first[1:] = fr[order][1:] != fr[order][:-1]
        pick = order[first]

        out = []
        s_base = np.concatenate([[0.0], np.cumsum(l)])
        for c in pick:
            f = int(fr[c])
            k = int(sg[c])
            gk = float(g[c])
            lam = lam_f[f]
            if lam - prm.eps * gk < 0.0:
                continue
            al = float(min(max(alpha[c], 0.0), 1.0))
            a_id = b_id = None
            if not tgt.rigid:
                a_id = int(tgt.nodes[k])
                b_id = int(tgt.nodes[(k + 1) % len(tgt.nodes)])
            out.append(_Hit(pi, f, int(pair.followers[f]), k, al, gk, lam - prm.eps * gk,
                            n[k], t[k], float(l[k]), a_id, b_id, float(s_base[k] + al * l[k])))
        return out

    # -- forces -----------------------------------------------------------

    def evaluate(self, xflat, tangent: bool = True):
        x = np.asarray(xflat, dtype=float).reshape(-1, 2)
        ndof = xflat.size
        hits = self._detect(x)
        self._hits = hits
        r = np.zeros(ndof)
        rows, cols, vals = [], [], []
        eps = self.params.eps
        kt = self.params.kt if self.params.kt is not None else eps
        for h in hits:
            pair = self.pairs[h.pair]
            A = float(pair.areas[h.fi])
            if h.a is None:
                dofs = [2 * h.node, 2 * h.node + 1]
                Ns = h.n
                r[dofs] += -h.p * A * Ns
                if tangent:
                    K = eps * A * np.outer(Ns, Ns)
            else:
                dofs = [2 * h.node, 2 * h.node + 1, 2 * h.a, 2 * h.a + 1, 2 * h.b, 2 * h.b + 1]
                Ns = np.concatenate([h.n, -(1 - h.alpha) * h.n, -h.alpha * h.n])
                Ts = np.concatenate([h.t, -(1 - h.alpha) * h.t, -h.alpha * h.t])
                N0 = np.concatenate([np.zeros(2), -h.n, h.n])
                r[dofs] += -h.p * A * Ns
                if tangent:
                    K = eps * A * np.outer(Ns, Ns) + (h.p * A / h.l) * (
                        np.outer(Ts, N0) + np.outer(N0, Ts) + (h.g / h.l) * np.outer(N0, N0))
            mu = pair.mu
            if mu > 0.0 and h.a is None:
                key = (h.pair, h.node)
                q0, s0 = self.fric.get(key, (0.0, None))
                if s0 is None:
                    s0 = self._entry.setdefault(key, h.s)
                perim = float(np.linalg.norm(np.roll(pair.target.points, -1, 0) - pair.target.points, axis=1).sum())
                slip = (h.s - s0 + 0.5 * perim) % perim - 0.5 * perim
                q, stick = friction_traction(q0, kt, slip, mu, h.p)
                r[dofs] += q * A * h.t
                if tangent:
                    if stick:
                        K = K + kt * A * np.outer(h.t, h.t)
                    else:
                        K = K - mu * eps * math.copysign(1.0, q) * A * np.outer(h.t, h.n)
            if tangent:
                rr, cc = np.meshgrid(dofs, dofs, indexing="ij")
                rows.append(rr.ravel())
                cols.append(cc.ravel())
                vals.append(K.ravel())
        if not tangent:
            return r, None
        if not rows:
            return r, None
        Kc = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(ndof, ndof)).tocsr()
        return r, Kc

    # -- augmentation and bookkeeping ---------------------------------------

    def augment(self, xflat):
        """Uzawa update; returns (within tolerance, max penetration)."""
        x = np.asarray(xflat, dtype=float).reshape(-1, 2)
        hits = self._detect(x)
        pen = max([-h.g for h in hits] + [0.0])
        if pen <= self.params.g_tol:
            self._hits = hits
            return True, pen
        self.lam = {(h.pair, h.node): h.p for h in hits}
        return False, pen

    def commit(self, xflat):
        r, _ = self.evaluate(xflat, tangent=False)
        self.committed_forces = -r
        hits = self._hits
        self.lam = {(h.pair, h.node): h.p for h in hits}
        kt = self.params.kt if self.params.kt is not None else self.params.eps
        fric = {}
        for h in hits:
            pair = self.pairs[h.pair]
            if pair.mu > 0.0 and h.a is None:
                key = (h.pair, h.node)
                q0, s0 = self.fric.get(key, (0.0, None))
                if s0 is None:
                    s0 = self._entry.get(key, h.s)
                perim = float(np.linalg.norm(np.roll(pair.target.points, -1, 0) - pair.target.points, axis=1).sum())
                slip = (h.s - s0 + 0.5 * perim) % perim - 0.5 * perim
                q, _ = friction_traction(q0, kt, slip, pair.mu, h.p)
                fric[key] = (q, h.s)
        self.fric = fric
        self._entry = {}
        self._hits = hits
        self.history.append(self.active_sides())

    def tunneled(self, x_prev, x_new) -> bool:
        """True when a follower passed right through a rigid target within one increment.

        Only followers outside the target at both ends count, and the chord cut
        by the target must exceed the contact search depth, so grazing motion
        along a surface is not flagged.
        """
        xp = np.asarray(x_prev, dtype=float).reshape(-1, 2)
        xn = np.asarray(x_new, dtype=float).reshape(-1, 2)
        for pair in self.pairs:
            if not pair.target.rigid:
                continue
            P = pair.target.points
            a0, a1 = xp[pair.followers], xn[pair.followers]
            lo = np.minimum(a0, a1).min(axis=0)
            hi = np.maximum(a0, a1).max(axis=0)
            if np.any(hi < P.min(axis=0)) or np.any(lo > P.max(axis=0)):
                continue
            out = ~points_in_polygon(a0, P) & ~points_in_polygon(a1, P)
            if not out.any():
                continue
            a0, a1 = a0[out], a1[out]
            d = a1 - a0
            e = np.roll(P, -1, axis=0) - P
            w = P[None] - a0[:, None]
            den = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (w[..., 0] * e[None, :, 1] - w[..., 1] * e[None, :, 0]) / den
                s = (w[..., 0] * d[:, None, 1] - w[..., 1] * d[:, None, 0]) / den
            ok = np.isfinite(t) & (t >= 0) & (t <= 1) & (s >= 0) & (s <= 1)
            tt = np.where(ok, t, np.nan)
            span = (np.nanmax(tt, axis=1, initial=-np.inf) - np.nanmin(tt, axis=1, initial=np.inf))
            chord = np.where(ok.sum(axis=1) >= 2, span, 0.0) * np.linalg.norm(d, axis=1)
            if np.any(chord > self.params.depth):
                return True
        return False

    def snapshot(self):
        return dict(self.lam), dict(self.fric), len(self.history)

    def restore(self, snap):
        self.lam, self.fric = dict(snap[0]), dict(snap[1])
        del self.history[snap[2]:]
        self._entry = {}

    def active_keys(self):
        return sorted((h.pair, h.node) for h in self._hits)

    def active_sides(self) -> set:
        """Element sides touched by the current active set (followers' own sides and deformable targets)."""
        out = set()
        for h in self._hits:
            pair = self.pairs[h.pair]
            if pair.follower_sides is not None:
                out.update(pair.follower_sides[h.fi])
            if pair.target.sides is not None:
                out.add(pair.target.sides[h.seg])
        return out

    def contact_forces(self, xflat=None) -> np.ndarray:
        """Nodal contact forces on the bodies: the last committed state, or re-evaluated at ``xflat``."""
        if xflat is None:
            return self.committed_forces
        r, _ = self.evaluate(xflat, tangent=False)
        return -r


def _node_normals(chain_xy) -> np.ndarray:
    """Outward unit normals of a closed chain's nodes (mean of adjacent segment normals)."""
    d = np.roll(chain_xy, -1, axis=0) - chain_xy
    n = np.column_stack([d[:, 1], -d[:, 0]]) / np.linalg.norm(d, axis=1)[:, None]
    nn = n + np.roll(n, 1, axis=0)
    return nn / np.maximum(np.linalg.norm(nn, axis=1, keepdims=True), 1e-300)


def tributary_areas(coords, thickness: float, closed: bool = True) -> np.ndarray:
    """Half the sum of adjacent segment lengths, times thickness."""
    c = np.asarray(coords, dtype=float)
    if closed:
        seg = np.linalg.norm(np.roll(c, -1, axis=0) - c, axis=1)
        return 0.5 * (seg + np.roll(seg, 1)) * thickness
    seg = np.linalg.norm(np.diff(c, axis=0), axis=1)
    out = np.zeros(len(c))
    out[:-1] += 0.5 * seg
    out[1:] += 0.5 * seg
    return out * thickness


def penalty_parameters(E: float, mean_edge: float, min_width: float) -> ContactParams:
    """Default penalty 100 E / h, tolerance 1e-4 h, search depth half the thinnest member."""
    return ContactParams(eps=100.0 * E / mean_edge, g_tol=1e-4 * mean_edge, depth=0.5 * min_width)
