"""Total-Lagrangian plane-stress quadrilaterals with Newton-Raphson load stepping.

Elements use Saint Venant-Kirchhoff material with 2x2 Gauss quadrature.  The
default ``eas`` formulation adds four enhanced Green-strain modes, condensed
element by element, which removes shear locking and the spurious transverse
stiffening of bilinear quads in bending.  ``q4`` is the plain displacement
element.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AnalysisFailed, StepRejected

log = logging.getLogger(__name__)

_G = 1.0 / math.sqrt(3.0)
GAUSS = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])


@dataclass(frozen=True)
class Material:
    E: float = 20.0        # N/mm^2
    nu: float = 0.33
    thickness: float = 6.0  # mm

    def __post_init__(self):
        if self.E <= 0 or not 0 <= self.nu < 0.5 or self.thickness <= 0:
            raise ValueError(f"invalid material {self}")

    @property
    def C(self) -> np.ndarray:
        E, nu = self.E, self.nu
        return E / (1 - nu**2) * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, 0.5 * (1 - nu)]])


def shape_derivs(xi, eta):
    """dN/dxi, dN/deta for the four bilinear shape functions."""
    return np.array([[-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
                     [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)]]).T * 0.25  # (4, 2)


_DN = np.stack([shape_derivs(*g) for g in GAUSS])  # (4 gp, 4 nodes, 2)


def _strain_map(Jinv):
    """Voigt map from natural to Cartesian Green strain, (..., 3, 3)."""
    a11, a12 = Jinv[..., 0, 0], Jinv[..., 0, 1]
    a21, a22 = Jinv[..., 1, 0], Jinv[..., 1, 1]
    T = np.empty(Jinv.shape[:-2] + (3, 3))
    T[..., 0, :] = np.stack([a11**2, a21**2, a11 * a21], -1)
    T[..., 1, :] = np.stack([a12**2, a22**2, a12 * a22], -1)
    T[..., 2, :] = np.stack([2 * a11 * a12, 2 * a21 * a22, a11 * a22 + a21 * a12], -1)
    return T


class Assembler:
    """Precomputed reference geometry and sparsity pattern for repeated assembly."""

    def __init__(self, nodes, elements, material: Material, formulation: str = "eas"):
        if formulation not in ("eas", "q4"):
            raise ValueError(f"unknown formulation {formulation!r}")
        self.X = np.asarray(nodes, dtype=float)
        self.el = np.asarray(elements, dtype=int)
        self.mat = material
        self.formulation = formulation
        self.C = material.C
        self.ndof = 2 * len(self.X)
        Xe = self.X[self.el]                                     # (E, 4, 2)
        J = np.einsum("gak,eai->egik", _DN, Xe)                  # J[i, k] = dX_i/dxi_k
        self.detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(self.detJ <= 0):
            raise ValueError("reference mesh has non-positive Jacobians")
        Jinv = np.linalg.inv(J)                                  # dxi_k/dX_i
        self.dNdX = np.einsum("gak,egki->egai", _DN, Jinv)       # (E, G, 4, 2)
        self.wdet = self.detJ * material.thickness               # unit Gauss weights
        self.dofs = np.stack([2 * self.el, 2 * self.el + 1], -1).reshape(len(self.el), 8)

        if formulation == "eas":
            J0 = np.einsum("ak,eai->eik", shape_derivs(0.0, 0.0), Xe)
            det0 = J0[:, 0, 0] * J0[:, 1, 1] - J0[:, 0, 1] * J0[:, 1, 0]
            T0 = _strain_map(np.linalg.inv(J0))                  # (E, 3, 3)
            M = np.zeros((len(GAUSS), 3, 4))
            for g, (xi, eta) in enumerate(GAUSS):
                M[g] = [[xi, 0, 0, 0], [0, eta, 0, 0], [0, 0, xi, eta]]
            ratio = det0[:, None] / self.detJ                    # (E, G)
            self.M = np.einsum("eg,eij,gjk->egik", ratio, T0, M)  # (E, G, 3, 4)
            H = np.einsum("egji,jk,egkl,eg->eil", self.M, self.C, self.M, self.wdet, optimize=True)
            self.Hinv = np.linalg.inv(H)
            # (E, 4, G*3): alpha residual operator  sum_g w M^T C
            MC = np.einsum("egji,jk,eg->eigk", self.M, self.C, self.wdet, optimize=True)
            self._MtCw = MC.reshape(len(self.el), 4, -1)

        rows = np.repeat(self.dofs, 8, axis=1).ravel()
        cols = np.tile(self.dofs, (1, 8)).ravel()
        key = rows.astype(np.int64) * self.ndof + cols
        uniq, self._slot = np.unique(key, return_inverse=True)
        self._indices = (uniq % self.ndof).astype(np.int32)
        counts = np.bincount((uniq // self.ndof).astype(np.int64), minlength=self.ndof)
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)

    # -- kinematics --------------------------------------------------------

    def _kinematics(self, u):
        ue = u[self.dofs].reshape(-1, 4, 2)
        F = np.eye(2) + np.einsum("eai,egaj->egij", ue, self.dNdX)  # F[i, j] = dx_i/dX_j
        detF = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        C = np.einsum("egki,egkj->egij", F, F)
        Ev = np.stack([0.5 * (C[..., 0, 0] - 1), 0.5 * (C[..., 1, 1] - 1), C[..., 0, 1]], -1)
        d = self.dNdX
        B = np.empty(F.shape[:2] + (3, 8))
        B[..., 0, 0::2] = d[..., 0] * F[..., 0, 0, None]
        B[..., 0, 1::2] = d[..., 0] * F[..., 1, 0, None]
        B[..., 1, 0::2] = d[..., 1] * F[..., 0, 1, None]
        B[..., 1, 1::2] = d[..., 1] * F[..., 1, 1, None]
        B[..., 2, 0::2] = d[..., 0] * F[..., 0, 1, None] + d[..., 1] * F[..., 0, 0, None]
        B[..., 2, 1::2] = d[..., 0] * F[..., 1, 1, None] + d[..., 1] * F[..., 1, 0, None]
        return Ev, B, detF

    def strains(self, u):
        """Total Green strain (Voigt) at every Gauss point, (E, G, 3)."""
        Ev, _, _ = self._kinematics(u)
        if self.formulation == "eas":
            Ev = self._enhance(Ev)
        return Ev

    def _alpha(self, Ev):
        a = self._MtCw @ Ev.reshape(len(Ev), -1, 1)
        return -(self.Hinv @ a)[..., 0]

    def _enhance(self, Ev):
        return Ev + (self.M @ self._alpha(Ev)[:, None, :, None])[..., 0]

    def energy(self, u) -> float:
        Ev = self.strains(u)
        return 0.5 * float(np.einsum("egi,ij,egj,eg->", Ev, self.C, Ev, self.wdet))

    def internal(self, u, tangent: bool = True):
        """Internal force vector and (optionally) CSR tangent; raises StepRejected on inversion."""
        u = np.asarray(u, dtype=float)
        Ev, B, detF = self._kinematics(u)
        if not np.all(np.isfinite(Ev)) or np.any(detF <= 0):
            raise StepRejected("element inversion")
        if self.formulation == "eas":
            Ev = self._enhance(Ev)
        S = Ev @ self.C                                        # C symmetric
        ne = len(Ev)
        Sw = S * self.wdet[..., None]
        fe = (Sw.reshape(ne, 1, -1) @ B.reshape(ne, -1, 8))[:, 0]
        f = np.bincount(self.dofs.ravel(), weights=fe.ravel(), minlength=self.ndof)
        if not tangent:
            return f, None
        CBw = (self.C @ B) * self.wdet[..., None, None]
        Bt = B.reshape(ne, -1, 8).transpose(0, 2, 1)
        Ke = Bt @ CBw.reshape(ne, -1, 8)
        # geometric stiffness
        d = self.dNdX
        G = (S[..., 0, None, None] * d[..., :, None, 0] * d[..., None, :, 0]
             + S[..., 1, None, None] * d[..., :, None, 1] * d[..., None, :, 1]
             + S[..., 2, None, None] * (d[..., :, None, 0] * d[..., None, :, 1]
                                        + d[..., :, None, 1] * d[..., None, :, 0]))
        Gsum = np.einsum("egab,eg->eab", G, self.wdet, optimize=True)
        Ke[:, 0::2, 0::2] += Gsum
        Ke[:, 1::2, 1::2] += Gsum
        if self.formulation == "eas":
            L = CBw.reshape(ne, -1, 8).transpose(0, 2, 1) @ self.M.reshape(ne, -1, 4)
            Ke -= L @ self.Hinv @ L.transpose(0, 2, 1)
        return f, self.csr(Ke)

    def csr(self, Ke) -> sp.csr_matrix:
        data = np.bincount(self._slot, weights=np.asarray(Ke).ravel(), minlength=len(self._indices))
        return sp.csr_matrix((data, self._indices, self._indptr), shape=(self.ndof, self.ndof))


def assemble(nodes, elements, material: Material, u, formulation: str = "eas"):
    """Internal forces and tangent stiffness at displacement ``u``."""
    return Assembler(nodes, elements, material, formulation).internal(u)


# ---------------------------------------------------------------------------
# Nonlinear solve


@dataclass(frozen=True)
class LoadCase:
    node: int
    direction: tuple = (1.0, 0.0)
    magnitude: float = 0.0     # N
    fixed_nodes: tuple = ()
    n_steps: int = 20
    extra_loads: tuple = ()    # ((node, fx, fy), ...) applied proportionally
    fixed_dofs: tuple = ()     # individual constrained dofs (2 * node + component)

    def vector(self, ndof: int) -> np.ndarray:
        f = np.zeros(ndof)
        d = np.asarray(self.direction, dtype=float)
        d = d / np.linalg.norm(d)
        f[2 * self.node:2 * self.node + 2] += self.magnitude * d
        for n, fx, fy in self.extra_loads:
            f[2 * n] += fx
            f[2 * n + 1] += fy
        return f


@dataclass
class SolverOptions:
    n_steps: int = 20
    max_iter: int = 25
    rtol: float = 1e-6
    min_fraction: float = 1.0 / 64.0
    max_aug: int = 20
    formulation: str = "eas"


@dataclass
class StepRecord:
    load_factor: float
    u: np.ndarray
    iterations: int
    aug_rounds: int
    active: list = field(default_factory=list)   # active contact pair keys
    penetration: float = 0.0


@dataclass
class SolveResult:
    path: np.ndarray            # (n_converged + 1, 2) output node positions
    steps: list                 # StepRecord per converged increment (first is the undeformed state)
    u: np.ndarray
    contact_state: object = None

    @property
    def load_factors(self) -> np.ndarray:
        return np.array([s.load_factor for s in self.steps])


class NullContact:
    """Placeholder contact handler with no pairs."""

    def evaluate(self, x, tangent=True):
        return np.zeros(x.size), None

    def augment(self, x):
        return True, 0.0

    def commit(self, x):
        pass

    def reset_trial(self):
        pass

    def snapshot(self):
        return None

    def restore(self, snap):
        pass

    def active_keys(self):
        return []

    def tunneled(self, x_prev, x_new):
        return False


def solve(nodes, elements, material: Material, load: LoadCase, output_node: int,
          contact=None, options: SolverOptions | None = None) -> SolveResult:
    """Incremental Newton-Raphson with adaptive halving and augmented-Lagrangian contact."""
    opt = options or SolverOptions(n_steps=load.n_steps)
    asm = Assembler(nodes, elements, material, opt.formulation)
    X = asm.X.ravel()
    contact = contact or NullContact()
    ndof = asm.ndof
    fixed = np.zeros(ndof, dtype=bool)
    for n in load.fixed_nodes:
        fixed[2 * n:2 * n + 2] = True
    fixed[list(load.fixed_dofs)] = True
    free = np.flatnonzero(~fixed)
    f_total = load.vector(ndof)

    u = np.zeros(ndof)
    x0 = asm.X[output_node].copy()
    path = [x0.copy()]
    steps = [StepRecord(0.0, u.copy(), 0, 0)]
    if not np.any(f_total):
        for k in range(1, opt.n_steps + 1):
            path.append(x0.copy())
            steps.append(StepRecord(k / opt.n_steps, u.copy(), 0, 0))
        return SolveResult(np.array(path), steps, u, contact.snapshot())

    base = 1.0 / opt.n_steps
    lam, inc = 0.0, base
    while lam < 1.0 - 1e-12:
        inc = min(inc, 1.0 - lam)
        target = lam + inc
        snap = contact.snapshot()
        try:
            u_new, its, rounds, pen = _converge(asm, X, u, free, target * f_total, contact, opt)
            if contact.tunneled(X + u, X + u_new):
                raise StepRejected("a node passed through a rigid surface")
        except (StepRejected, np.linalg.LinAlgError, RuntimeError) as exc:
            contact.restore(snap)
            inc *= 0.5
            log.debug("increment cut to %.4g at load %.4g: %s", inc, lam, exc)
            if inc < base * opt.min_fraction - 1e-15:
                raise AnalysisFailed(f"no convergence at load factor {lam:.4f}") from exc
            continue
        u = u_new
        lam = target
        contact.commit(X + u)
        path.append(asm.X[output_node] + u[2 * output_node:2 * output_node + 2])
        steps.append(StepRecord(lam, u.copy(), its, rounds, contact.active_keys(), pen))
        inc = min(base, 2.0 * inc)
    return SolveResult(np.array(path), steps, u, contact.snapshot())


def _converge(asm, X, u0, free, f_ext, contact, opt):
    tol = opt.rtol * max(np.linalg.norm(f_ext), 1e-300)
    u = u0.copy()
    total_its = 0
    for rnd in range(opt.max_aug):
        converged = False
        for it in range(opt.max_iter):
            f_int, K = asm.internal(u)
            f_c, K_c = contact.evaluate(X + u)
            r = f_int + f_c - f_ext
            res = np.linalg.norm(r[free])
            if not np.isfinite(res):
                raise StepRejected("non-finite residual")
            if res <= tol:
                converged = True
                break
            if K_c is not None:
                K = K + K_c
            Kff = K[free][:, free].tocsc()
            du = spla.spsolve(Kff, -r[free])
            if not np.all(np.isfinite(du)):
                raise StepRejected("singular tangent")
            u[free] += du
            total_its += 1
        if not converged:
            raise StepRejected(f"Newton did not converge (residual {res:.3e}, tol {tol:.3e})")
        ok, pen = contact.augment(X + u)
        if ok:
            return u, total_its, rnd, pen
    raise StepRejected("augmentation did not converge")
