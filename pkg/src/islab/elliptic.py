"""Weighted elliptic operators of the linearized system.

Pointwise operators (``apply_L*``) use finite differences of chosen
accuracy.  The discrete operators used for spectra and shifted solves are
assembled from quadratic forms, ``K = sum B^T D B``, with a diagonal or
block-diagonal mass ``W`` of the sector's weighted inner product.  The
represented operator is ``M = W^-1 K``, the discrete version of ``-L_hat``,
which is non-negative and self-adjoint by construction.

Index conventions: spatial covariant components ``u~_k`` coincide with the
contravariant ones in signature (-,+,+,+); outputs of the vector operators
are covectors lifted by ``A_a^i`` and returned with ``dim + 1`` components.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Literal, Sequence

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DegeneracyError, DomainError
from .grid import DEFAULT_ACCURACY, BoxGrid, GridLike, MovingGrid, fd_derivative
from .model import ModelConstants, TransformedState, lower
from .spaces import WeightedNormSpec, hjsigma_norm

Array = npt.NDArray[np.float64]
Sector = Literal["L1hat", "L23hat"]

DENSE_LIMIT = 2000


# ---------------------------------------------------------------- frame fields

@dataclass(frozen=True)
class FrameFields:
    """``A[a, i] = g_a^i - (u^i/u^0) g_a^0`` and ``H[i, j] = delta^ij - u^i u^j / (u^0)^2``."""

    A: Array
    H: Array

    @classmethod
    def from_velocity(cls, u: npt.ArrayLike) -> "FrameFields":
        u = np.asarray(u, dtype=float)
        dim = u.shape[0] - 1
        v = u[1:] / u[0]
        shape = u.shape[1:]
        eye = np.eye(dim).reshape((dim, dim) + (1,) * len(shape))
        A = np.zeros((dim + 1, dim) + shape)
        A[0] = -v
        A[1:] = np.broadcast_to(eye, (dim, dim) + shape)
        H = eye - v[:, None] * v[None, :]
        return cls(A, H)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def H_inverse(self) -> Array:
        Hm = np.moveaxis(np.moveaxis(self.H, 0, -1), 0, -1)
        return np.moveaxis(np.moveaxis(np.linalg.inv(Hm), -1, 0), -1, 0)

    def lift(self, Y: Array) -> Array:
        """Covector (L)_a = A_a^i Y_i from spatial components Y (dim, ...)."""
        return np.einsum("ai...,i...->a...", self.A, Y)


def _axes(grid: GridLike, f: Array) -> list[int]:
    return list(range(f.ndim - grid.dim, f.ndim))


def _D(f: Array, i: int, grid: GridLike, accuracy: int) -> Array:
    return fd_derivative(f, 1, grid, axis=_axes(grid, f)[i], accuracy=accuracy)


def _DD(f: Array, i: int, j: int, grid: GridLike, accuracy: int) -> Array:
    if i == j:
        return fd_derivative(f, 2, grid, axis=_axes(grid, f)[i], accuracy=accuracy)
    return _D(_D(f, j, grid, accuracy), i, grid, accuracy)


def _fields(background: TransformedState, grid: GridLike) -> tuple[Array, FrameFields]:
    r = np.asarray(background.r, dtype=float)
    if r.shape != tuple(_shape(grid)):
        raise DomainError(f"background shape {r.shape} does not match grid {tuple(_shape(grid))}")
    return r, FrameFields.from_velocity(background.u)


def _shape(grid: GridLike) -> tuple[int, ...]:
    return (grid.n_cells,) if isinstance(grid, MovingGrid) else tuple(grid.shape)


def _spatial(ut: npt.ArrayLike, dim: int) -> Array:
    ut = np.asarray(ut, dtype=float)
    if ut.shape[0] == dim + 1:
        return ut[1:]
    if ut.shape[0] == dim:
        return ut
    raise DomainError(f"vector field needs {dim} or {dim + 1} components, got {ut.shape[0]}")


# ---------------------------------------------------------------- pointwise operators

def apply_L1_tilde(rt: npt.ArrayLike, background: TransformedState, grid: GridLike, c: ModelConstants,
                   accuracy: int = DEFAULT_ACCURACY) -> Array:
    """(k+1) H^ij (r d_i d_j r~ + (1/k) d_i r d_j r~)."""
    r, fr = _fields(background, grid)
    rt = np.asarray(rt, dtype=float)
    k = c.kappa
    out = np.zeros_like(rt)
    d = grid.dim
    dr = [_D(r, i, grid, accuracy) for i in range(d)]
    drt = [_D(rt, j, grid, accuracy) for j in range(d)]
    for i in range(d):
        for j in range(d):
            out += fr.H[i, j] * (r * _DD(rt, i, j, grid, accuracy) + dr[i] * drt[j] / k)
    return (k + 1) * out


def apply_L1_hat(rt: npt.ArrayLike, background: TransformedState, grid: GridLike, c: ModelConstants,
                 accuracy: int = DEFAULT_ACCURACY) -> Array:
    """(k+1) r^(1-1/k) d_i (r^(1/k) H^ij d_j r~)."""
    r, fr = _fields(background, grid)
    rt = np.asarray(rt, dtype=float)
    k = c.kappa
    d = grid.dim
    rk = r ** (1 / k)
    drt = [_D(rt, j, grid, accuracy) for j in range(d)]
    out = np.zeros_like(rt)
    for i in range(d):
        flux = sum(rk * fr.H[i, j] * drt[j] for j in range(d))
        out += _D(flux, i, grid, accuracy)
    return (k + 1) * r ** (1 - 1 / k) * out


def apply_L2_tilde(ut: npt.ArrayLike, background: TransformedState, grid: GridLike, c: ModelConstants,
                   accuracy: int = DEFAULT_ACCURACY) -> Array:
    """(k+1) A_a^i H^jk (d_i(r d_j u~_k) + (1/k) d_j r d_i u~_k)."""
    r, fr = _fields(background, grid)
    d = grid.dim
    us = _spatial(ut, d)
    k = c.kappa
    dr = [_D(r, j, grid, accuracy) for j in range(d)]
    du = [[_D(us[kk], j, grid, accuracy) for j in range(d)] for kk in range(d)]  # du[k][j] = d_j u_k
    Y = np.zeros_like(us)
    for i in range(d):
        for j in range(d):
            for kk in range(d):
                Y[i] += fr.H[j, kk] * (_D(r * du[kk][j], i, grid, accuracy) + dr[j] * du[kk][i] / k)
    return (k + 1) * fr.lift(Y)


def _curl(us: Array, grid: GridLike, accuracy: int) -> Array:
    """omega[k, i] = d_k u~_i - d_i u~_k."""
    d = grid.dim
    om = np.zeros((d, d) + us.shape[1:])
    for kk in range(d):
        for i in range(kk + 1, d):
            w = _D(us[i], kk, grid, accuracy) - _D(us[kk], i, grid, accuracy)
            om[kk, i], om[i, kk] = w, -w
    return om


def apply_L3_tilde(ut: npt.ArrayLike, background: TransformedState, grid: GridLike, c: ModelConstants,
                   accuracy: int = DEFAULT_ACCURACY) -> Array:
    """(k+1) A_a^i H^jk r^(-1/k) d_j (r^(1/k+1) (d_k u~_i - d_i u~_k)); identically zero in 1D."""
    r, fr = _fields(background, grid)
    d = grid.dim
    us = _spatial(ut, d)
    k = c.kappa
    if d == 1:
        return np.zeros((d + 1,) + us.shape[1:])
    om = _curl(us, grid, accuracy)
    w = r ** (1 / k + 1)
    Y = np.zeros_like(us)
    for i in range(d):
        for j in range(d):
            for kk in range(d):
                if kk != i:
                    Y[i] += fr.H[j, kk] * _D(w * om[kk, i], j, grid, accuracy)
    return (k + 1) * fr.lift(Y / r ** (1 / k))


def apply_L2_hat(ut: npt.ArrayLike, background: TransformedState, grid: GridLike, c: ModelConstants,
                 accuracy: int = DEFAULT_ACCURACY) -> Array:
    """(k+1) A_a^i d_i (r^(1-1/k) X) with X = d_j (r^(1/k) H^jk u~_k)."""
    r, fr = _fields(background, grid)
    d = grid.dim
    us = _spatial(ut, d)
    k = c.kappa
    rk = r ** (1 / k)
    X = sum(_D(rk * sum(fr.H[j, kk] * us[kk] for kk in range(d)), j, grid, accuracy) for j in range(d))
    q = r ** (1 - 1 / k) * X
    Y = np.stack([_D(q, i, grid, accuracy) for i in range(d)])
    return (k + 1) * fr.lift(Y)


def apply_L3_hat(ut: npt.ArrayLike, background: TransformedState, grid: GridLike, c: ModelConstants,
                 accuracy: int = DEFAULT_ACCURACY) -> Array:
    """(k+1) A_a^l Delta_ml r^(-1/k) d_j (r^(1/k+1) H^jk H^im omega_ki), Delta = H^-1."""
    r, fr = _fields(background, grid)
    d = grid.dim
    us = _spatial(ut, d)
    k = c.kappa
    if d == 1:
        return np.zeros((d + 1,) + us.shape[1:])
    om = _curl(us, grid, accuracy)
    T = np.einsum("jk...,ki...,im...->jm...", fr.H, om, fr.H)
    w = r ** (1 / k + 1)
    div = np.stack([sum(_D(w * T[j, m], j, grid, accuracy) for j in range(d)) for m in range(d)])
    Y = np.einsum("ml...,m...->l...", fr.H_inverse(), div) / r ** (1 / k)
    return (k + 1) * fr.lift(Y)


def apply_L23_tilde(ut, background, grid, c, accuracy: int = DEFAULT_ACCURACY) -> Array:
    return apply_L2_tilde(ut, background, grid, c, accuracy) + apply_L3_tilde(ut, background, grid, c, accuracy)


def apply_L23_hat(ut, background, grid, c, accuracy: int = DEFAULT_ACCURACY) -> Array:
    return apply_L2_hat(ut, background, grid, c, accuracy) + apply_L3_hat(ut, background, grid, c, accuracy)


def principal_part_defect(which: Literal["L1", "L23"], background: TransformedState, grid: GridLike,
                          c: ModelConstants, rng: np.random.Generator, probes: int = 3,
                          accuracy: int = DEFAULT_ACCURACY) -> float:
    """Largest change of (hat - tilde) at a probe node when a quadratic with zero value and
    gradient at that node (random Hessian) is added to the probe field.

    Equal principal parts make the difference independent of second derivatives, so the
    result is at roundoff level with stencils exact on quadratics."""
    x = np.asarray(grid.nodes, dtype=float)
    if isinstance(grid, MovingGrid):
        x = x[None]
    shape = _shape(grid)
    d = grid.dim
    worst = 0.0
    for _ in range(probes):
        idx = tuple(int(rng.integers(s // 4, 3 * s // 4)) for s in shape)
        x0 = np.array([x[(a,) + idx] for a in range(d)])
        dx = x - x0.reshape((d,) + (1,) * d)
        base = sum(rng.normal() * dx[a] for a in range(d))
        Q = rng.normal(size=(d, d))
        Q = Q + Q.T
        quad = 0.5 * np.einsum("a...,ab,b...->...", dx, Q, dx)
        if which == "L1":
            diff = lambda f: apply_L1_hat(f, background, grid, c, accuracy) - apply_L1_tilde(f, background, grid, c, accuracy)
            f1, f2 = base, base + quad
        else:
            diff = lambda f: apply_L23_hat(f, background, grid, c, accuracy) - apply_L23_tilde(f, background, grid, c, accuracy)
            v = rng.normal(size=d)
            f1 = np.stack([base * v[a] for a in range(d)])
            f2 = f1 + np.stack([quad * rng.normal() for _ in range(d)])
        d1, d2 = diff(f1), diff(f2)
        scale = 1.0 + float(np.max(np.abs(d1)))
        worst = max(worst, float(np.max(np.abs(d1[(Ellipsis,) + idx] - d2[(Ellipsis,) + idx]))) / scale)
    return worst


# ---------------------------------------------------------------- discrete assembly

def _dual_operators(grid: GridLike) -> tuple[list[sp.csr_matrix], sp.csr_matrix, float]:
    """Gradients from nodes to dual cells (one per axis), corner averaging, dual-cell volume."""
    shape = _shape(grid)
    hs = [grid.spacing(a) if isinstance(grid, BoxGrid) else grid.h for a in range(len(shape))]
    diffs, avgs = [], []
    for n, h in zip(shape, hs):
        e = np.ones(n - 1)
        diffs.append(sp.diags([-e, e], [0, 1], shape=(n - 1, n)) / h)
        avgs.append(sp.diags([0.5 * e, 0.5 * e], [0, 1], shape=(n - 1, n)))
    kron = lambda mats: reduce(lambda a, b: sp.kron(a, b, format="csr"), mats)
    grads = [kron([diffs[a] if a == i else avgs[a] for a in range(len(shape))]) for i in range(len(shape))]
    return grads, kron(avgs), float(np.prod(hs))


@dataclass
class DiscreteOperator:
    """M = W^-1 K, the discrete non-negative form of ``-L_hat``.

    ``inner_product_weight`` is the exponent of r in the sector's inner product
    (1/k - 1 scalar, 1/k vector).  The vector sector carries ``dim`` spatial
    covector components per node, component-major, and the pointwise metric H
    inside ``W``.
    """

    which: str
    K: sp.csr_matrix
    W: sp.csr_matrix
    inner_product_weight: float
    kappa: float
    h: float
    components: int
    boundary_handling: str = "natural no-flux at both edges (weights vanish at the vacuum edge)"
    _w_isqrt: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.K.shape[0]

    def action(self, f: npt.ArrayLike) -> Array:
        """M f for a flat vector of length ``size``."""
        return spla.spsolve(self.W.tocsc(), self.K @ np.asarray(f, dtype=float)) if self.components > 1 \
            else (self.K @ np.asarray(f, dtype=float)) / self.W.diagonal()

    def inner(self, f: npt.ArrayLike, g: npt.ArrayLike) -> float:
        return float(np.asarray(f) @ (self.W @ np.asarray(g)))

    def w_inv_sqrt(self) -> sp.csr_matrix:
        if self._w_isqrt is None:
            if self.components == 1:
                self._w_isqrt = sp.diags(1.0 / np.sqrt(self.W.diagonal())).tocsr()
            else:
                n = self.size // self.components
                d = self.components
                blocks = np.zeros((n, d, d))
                Wc = self.W.tocsr()
                for a in range(d):
                    for b in range(d):
                        blocks[:, a, b] = Wc[a * n:(a + 1) * n, b * n:(b + 1) * n].diagonal()
                lam, vec = np.linalg.eigh(blocks)
                iso = np.einsum("nab,nb,ncb->nac", vec, 1.0 / np.sqrt(lam), vec)
                self._w_isqrt = _block_matrix(iso)
        return self._w_isqrt

    def symmetric_matrix(self) -> sp.csr_matrix:
        """W^-1/2 K W^-1/2, similar to M."""
        S = self.w_inv_sqrt()
        return (S @ self.K @ S).tocsr()


def _block_matrix(blocks: Array) -> sp.csr_matrix:
    """Component-major sparse matrix from per-node (n, d, d) blocks."""
    n, d, _ = blocks.shape
    return sp.bmat([[sp.diags(blocks[:, a, b]) for b in range(d)] for a in range(d)], format="csr")


def assemble_discrete(which: Sector, background: TransformedState, grid: GridLike,
                      c: ModelConstants) -> DiscreteOperator:
    """Flux-form assembly of L1hat (scalar) or L2hat + L3hat (vector)."""
    r, fr = _fields(background, grid)
    if np.any(r <= 0):
        raise DegeneracyError("assembly needs r > 0 at every node (use cell-centered grids)")
    k = c.kappa
    d = grid.dim
    grads, avg, vol = _dual_operators(grid)
    rn = r.ravel()
    rc = avg @ rn
    Hn = fr.H.reshape(d, d, -1)
    Hc = np.stack([np.stack([avg @ Hn[i, j] for j in range(d)]) for i in range(d)])
    h = float(grid.h if isinstance(grid, MovingGrid) else grid.spacing(0))
    cell_vol = grid.cell_volume
    if which == "L1hat":
        K = sp.csr_matrix((rn.size, rn.size))
        for i in range(d):
            for j in range(d):
                K = K + grads[i].T @ sp.diags((k + 1) * vol * rc ** (1 / k) * Hc[i, j]) @ grads[j]
        W = sp.diags(cell_vol * rn ** (1 / k - 1)).tocsr()
        return DiscreteOperator(which, K.tocsr(), W, 1 / k - 1, k, h, 1)
    if which != "L23hat":
        raise DomainError(f"unknown operator {which!r}")
    n = rn.size
    # divergence part: X = sum_j G_j (r^(1/k) H^jk u_k)
    X = sp.hstack([sum(grads[j] @ sp.diags(rn ** (1 / k) * Hn[j, kk]) for j in range(d)) for kk in range(d)]).tocsr()
    K = (k + 1) * X.T @ sp.diags(vol * rc ** (1 - 1 / k)) @ X
    if d > 1:
        # curl part: |H^(1/2) omega H^(1/2)|_F^2 / 2 on dual cells
        lam, vec = np.linalg.eigh(np.moveaxis(np.moveaxis(Hc, 0, -1), 0, -1))
        S = np.einsum("cab,cb,cdb->cad", vec, np.sqrt(lam), vec)
        E = [sp.hstack([sp.identity(n, format="csr") if b == a else sp.csr_matrix((n, n)) for b in range(d)]).tocsr()
             for a in range(d)]
        Dw = sp.diags(0.5 * (k + 1) * vol * rc ** (1 / k + 1))
        for a in range(d):
            for b in range(d):
                B = sp.csr_matrix((rc.size, n * d))
                for kk in range(d):
                    for i in range(d):
                        if kk == i:
                            continue
                        coef = S[:, a, kk] * S[:, i, b]
                        B = B + sp.diags(coef) @ grads[kk] @ E[i] - sp.diags(coef) @ grads[i] @ E[kk]
                K = K + B.T @ Dw @ B
    blocks = cell_vol * rn[:, None, None] ** (1 / k) * np.moveaxis(Hn, -1, 0)
    W = _block_matrix(blocks)
    return DiscreteOperator(which, sp.csr_matrix(K), W, 1 / k, k, h, d)


@dataclass(frozen=True)
class SpectrumReport:
    operator: str
    kappa: float
    h: float
    min_eig: float
    max_eig: float
    norm: float
    sym_defect: float
    size: int
    dense: bool

    @property
    def nonnegative(self) -> bool:
        return self.min_eig >= -1e-8 * self.norm

    def as_dict(self, max_ratio: float | None = None) -> dict:
        return {"operator": self.operator, "kappa": self.kappa, "h": self.h, "min_eig": self.min_eig,
                "sym_defect": self.sym_defect, "max_ratio": max_ratio}


def symmetry_defect(A: sp.spmatrix) -> float:
    nrm = spla.norm(A, np.inf)
    return float(spla.norm(A - A.T, np.inf) / nrm) if nrm > 0 else 0.0


def spectrum(op: DiscreteOperator, dense_limit: int = DENSE_LIMIT) -> SpectrumReport:
    """Extreme eigenvalues of M (generalized problem K x = lambda W x)."""
    S = op.symmetric_matrix()
    defect = symmetry_defect(S)
    nrm = float(spla.norm(S, np.inf))
    Ssym = 0.5 * (S + S.T)
    if op.size <= dense_limit:
        ev = np.linalg.eigvalsh(Ssym.toarray())
        lo, hi, dense = float(ev[0]), float(ev[-1]), True
    else:
        shift = -1e-3 * max(nrm, 1e-300)
        lo = float(spla.eigsh(Ssym.tocsc(), k=1, sigma=shift, which="LM", return_eigenvectors=False,
                              tol=1e-10)[0])
        hi = float(spla.eigsh(Ssym, k=1, which="LA", return_eigenvectors=False, tol=1e-6)[0])
        dense = False
    return SpectrumReport(op.which, op.kappa, op.h, lo, hi, nrm, defect, op.size, dense)


def rayleigh_quotients(op: DiscreteOperator, samples: Array) -> Array:
    """<Mf, f>_W / <f, f>_W = f^T K f / f^T W f for each row of ``samples``."""
    return np.array([(f @ (op.K @ f)) / (f @ (op.W @ f)) for f in samples])


def solve_shifted(op: DiscreteOperator, rhs: npt.ArrayLike, rtol: float = 1e-10, maxiter: int | None = None,
                  x0: npt.ArrayLike | None = None) -> Array:
    """Solve (M + I) x = rhs, i.e. (K + W) x = W rhs, by Jacobi-preconditioned conjugate gradients."""
    b = op.W @ np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(b)):
        raise DomainError("right-hand side must be finite")
    bn = np.linalg.norm(b)
    if bn == 0:
        return np.zeros_like(b)
    A = (op.K + op.W).tocsr()
    diag = A.diagonal()
    pre = spla.LinearOperator(A.shape, matvec=lambda v: v / diag, dtype=float)
    cap = maxiter if maxiter is not None else 20 * A.shape[0]
    x, info = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=cap, M=pre)
    res = float(np.linalg.norm(A @ x - b) / bn)
    if info != 0 or not res <= 10 * rtol:
        raise ConvergenceError(f"shifted solve stopped at relative residual {res:.3e}", res,
                               info if info > 0 else cap)
    return x


# ---------------------------------------------------------------- ratio tests

@dataclass
class EllipticRatioReport:
    which: str
    kappa: float
    h: float
    ratios: Array
    ratios_refined: Array
    shifted_ratios: Array
    max_ratio: float
    max_ratio_refined: float
    trend: float
    excluded: int

    def as_dict(self) -> dict:
        return {"operator": self.which, "kappa": self.kappa, "h": self.h, "max_ratio": self.max_ratio,
                "max_ratio_refined": self.max_ratio_refined, "trend": self.trend,
                "max_shifted_ratio": float(np.max(self.shifted_ratios)) if self.shifted_ratios.size else None,
                "excluded": self.excluded}


FieldFn = Callable[[Array], Array]


def ratio_specs(which: str, kappa: float) -> tuple[WeightedNormSpec, WeightedNormSpec]:
    """(numerator, denominator) specs; numerators carry one extra half power of r per derivative pair."""
    s = 1 / (2 * kappa)
    if which == "L1":
        return WeightedNormSpec(2, s + 0.5), WeightedNormSpec(0, s - 0.5)
    return WeightedNormSpec(2, s + 1), WeightedNormSpec(0, s)


def _sample_ratios(which: str, ensemble: Sequence[FieldFn], state: TransformedState, grid: MovingGrid,
                   c: ModelConstants, accuracy: int) -> tuple[Array, Array, int]:
    num_spec, den_spec = ratio_specs(which, c.kappa)
    r = np.asarray(state.r)
    x = grid.nodes
    out, shifted, skipped = [], [], 0
    for f in ensemble:
        vals = np.asarray(f(x), dtype=float)
        if which == "L1":
            field_, Lt, Lh = vals, apply_L1_tilde, apply_L1_hat
        else:
            from .linearized import complete_perturbation
            field_ = complete_perturbation(state.u, np.atleast_2d(vals))
            Lt, Lh = apply_L23_tilde, apply_L23_hat
        base = hjsigma_norm(field_, den_spec, r, grid, accuracy)
        if base == 0:
            skipped += 1
            continue
        num = hjsigma_norm(field_, num_spec, r, grid, accuracy)
        lt = hjsigma_norm(Lt(field_, state, grid, c, accuracy), den_spec, r, grid, accuracy)
        hat = Lh(field_, state, grid, c, accuracy)
        if which == "L1":
            sh = hjsigma_norm(field_ - hat, den_spec, r, grid, accuracy)
        else:
            sh = hjsigma_norm(lower(field_) - hat, den_spec, r, grid, accuracy)
        out.append(num / (lt + base))
        shifted.append(num / sh if sh > 0 else np.inf)
    return np.array(out), np.array(shifted), skipped


def elliptic_ratio_test(which: Literal["L1", "L23"], ensemble: Sequence[FieldFn], background, grid: MovingGrid,
                        c: ModelConstants, accuracy: int = DEFAULT_ACCURACY, refine: int = 2) -> EllipticRatioReport:
    """Ratios ||f||_num / (||L~ f||_den + ||f||_den) on ``grid`` and its refinement.

    ``background`` provides ``state(grid)`` (for example a ManufacturedBackground);
    ``ensemble`` members map node coordinates to a scalar (L1) or the spatial
    velocity components (L23).  The shifted variant divides by ||(M + I) f||
    with M = -L_hat evaluated pointwise."""
    if len(ensemble) == 0:
        raise DomainError("empty ensemble")
    st = background.state(grid).transformed
    fine = grid.refined(refine)
    st_f = background.state(fine).transformed
    rat, shifted, skipped = _sample_ratios(which, ensemble, st, grid, c, accuracy)
    rat_f, _, _ = _sample_ratios(which, ensemble, st_f, fine, c, accuracy)
    mx, mxf = float(np.max(rat)), float(np.max(rat_f))
    return EllipticRatioReport(which, c.kappa, grid.h, rat, rat_f, shifted, mx, mxf, abs(mxf - mx) / mx, skipped)


# ---------------------------------------------------------------- curl annihilation

def curl_annihilation_check(phi: npt.ArrayLike | Callable[[Array], Array], background: TransformedState,
                            grid: GridLike, c: ModelConstants, grad_phi: Callable[[Array], Array] | None = None,
                            accuracy: int = DEFAULT_ACCURACY) -> float:
    """max |L~3 (grad phi)|; the gradient is exact when ``grad_phi`` is given, else finite-differenced."""
    x = np.asarray(grid.nodes, dtype=float)
    if isinstance(grid, MovingGrid):
        x = x[None]
    if grad_phi is not None:
        g = np.asarray(grad_phi(x), dtype=float)
    else:
        vals = np.asarray(phi(x) if callable(phi) else phi, dtype=float)
        g = np.stack([_D(vals, i, grid, accuracy) for i in range(grid.dim)])
    return float(np.max(np.abs(apply_L3_tilde(g, background, grid, c, accuracy))))
