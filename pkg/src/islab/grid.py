"""Cell-centered grids, finite-difference stencils, weighted quadrature and the flow map.

The 1D domain is ``[b, x_far]`` with the vacuum edge at ``b``.  Nodes are cell
centers, so a field that vanishes at the edge is never sampled at zero and
weights ``r**(2 sigma)`` with negative exponents stay evaluable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp
from scipy.interpolate import BarycentricInterpolator

from .errors import DomainCollapseError, DomainError, PropagationError, SizeError

Array = npt.NDArray[np.float64]

EDGE_CELLS = 2
DEFAULT_ACCURACY = 4


@dataclass(frozen=True)
class MovingGrid:
    """Uniform cell-centered grid on ``[b, x_far]``."""

    b: float
    x_far: float
    n_cells: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.b) and np.isfinite(self.x_far)):
            raise DomainError("grid edges must be finite")
        if self.b >= self.x_far:
            raise DomainCollapseError(f"vacuum edge b={self.b} reached the far edge {self.x_far}")
        if self.n_cells < 2 * EDGE_CELLS + 1:
            raise SizeError(f"need at least {2 * EDGE_CELLS + 1} cells, got {self.n_cells}")

    @property
    def h(self) -> float:
        return (self.x_far - self.b) / self.n_cells

    @property
    def nodes(self) -> Array:
        return self.b + (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def faces(self) -> Array:
        return self.b + np.arange(self.n_cells + 1) * self.h

    @property
    def interior_mask(self) -> npt.NDArray[np.bool_]:
        mask = np.ones(self.n_cells, dtype=bool)
        mask[:EDGE_CELLS] = False
        mask[-EDGE_CELLS:] = False
        return mask

    @property
    def length(self) -> float:
        return self.x_far - self.b

    @property
    def dim(self) -> int:
        return 1

    @property
    def cell_volume(self) -> float:
        return self.h

    def spacing(self, axis: int = 0) -> float:
        if axis not in (0, -1):
            raise DomainError(f"1D grid has no axis {axis}")
        return self.h

    def with_edge(self, b: float) -> "MovingGrid":
        """Same grid regenerated on ``[b, x_far]``."""
        return MovingGrid(b=float(b), x_far=self.x_far, n_cells=self.n_cells)

    def refined(self, factor: int = 2) -> "MovingGrid":
        return MovingGrid(self.b, self.x_far, self.n_cells * factor)


@dataclass(frozen=True)
class BoxGrid:
    """Uniform cell-centered tensor grid on a box (used by the operator checks)."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self) -> None:
        if not (len(self.lower) == len(self.upper) == len(self.shape)):
            raise DomainError("lower, upper and shape must have equal length")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise DomainError("box must have positive extent in every direction")
        if any(n < 6 for n in self.shape):
            raise SizeError("need at least 6 cells per direction")

    @classmethod
    def cube(cls, n: int, dim: int = 3, lower: float = 0.0, upper: float = 1.0) -> "BoxGrid":
        return cls((lower,) * dim, (upper,) * dim, (n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.shape)

    def spacing(self, axis: int = 0) -> float:
        return (self.upper[axis] - self.lower[axis]) / self.shape[axis]

    @property
    def cell_volume(self) -> float:
        return float(np.prod([self.spacing(a) for a in range(self.dim)]))

    def axis_nodes(self, axis: int) -> Array:
        return self.lower[axis] + (np.arange(self.shape[axis]) + 0.5) * self.spacing(axis)

    @property
    def nodes(self) -> Array:
        """Coordinates with shape ``(dim, *shape)``."""
        return np.stack(np.meshgrid(*[self.axis_nodes(a) for a in range(self.dim)], indexing="ij"))

    @property
    def interior_mask(self) -> npt.NDArray[np.bool_]:
        mask = np.ones(self.shape, dtype=bool)
        for a in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[a] = slice(0, EDGE_CELLS)
            mask[tuple(idx)] = False
            idx[a] = slice(-EDGE_CELLS, None)
            mask[tuple(idx)] = False
        return mask


GridLike = MovingGrid | BoxGrid


def fornberg_weights(z: float, x: Sequence[float], m: int) -> Array:
    """Finite-difference weights for derivatives 0..m at ``z`` from nodes ``x`` (Fornberg's recursion)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def min_nodes(order: int, accuracy: int = DEFAULT_ACCURACY) -> int:
    """Smallest field length supported by ``fd_derivative``."""
    return accuracy + order


@lru_cache(maxsize=128)
def derivative_matrix(n: int, order: int, accuracy: int = DEFAULT_ACCURACY) -> sp.csr_matrix:
    """Sparse unit-spacing derivative matrix.

    Interior rows use the centered ``accuracy + 1`` point stencil; the rows
    near the ends use the nearest window of ``accuracy + order`` points, which
    keeps the same formal accuracy and exactness on polynomials of degree
    ``accuracy - 1 + order``.
    """
    if order not in (1, 2):
        raise DomainError(f"derivative order must be 1 or 2, got {order}")
    if accuracy < 2 or accuracy % 2:
        raise DomainError(f"accuracy must be an even integer >= 2, got {accuracy}")
    width = accuracy + order
    if n < width:
        raise SizeError(f"order-{order} stencil of accuracy {accuracy} needs at least {width} nodes, got {n}")
    half = accuracy // 2
    rows, cols, vals = [], [], []
    for i in range(n):
        if half <= i < n - half:
            idx = np.arange(i - half, i + half + 1)
        else:
            start = min(max(i - width // 2, 0), n - width)
            idx = np.arange(start, start + width)
        w = fornberg_weights(float(i), idx.astype(float), order)
        rows.extend([i] * idx.size)
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sum_duplicates()
    return mat


def fd_derivative(f: npt.ArrayLike, order: int, grid: GridLike | float, axis: int = 0,
                  accuracy: int = DEFAULT_ACCURACY) -> Array:
    """Derivative of ``order`` 1 or 2 along ``axis``.

    ``grid`` may be a grid object or a plain spacing.  For a field with a
    leading component axis pass the spatial axis offset explicitly.
    """
    f = np.asarray(f, dtype=float)
    h = float(grid) if np.isscalar(grid) else grid.spacing(0 if isinstance(grid, MovingGrid) else axis)
    n = f.shape[axis]
    mat = derivative_matrix(n, order, accuracy)
    moved = np.moveaxis(f, axis, 0)
    out = (mat @ moved.reshape(n, -1)).reshape(moved.shape) / h**order
    return np.moveaxis(out, 0, axis)


def field_gradient(f: npt.ArrayLike, grid: GridLike, accuracy: int = DEFAULT_ACCURACY) -> Array:
    """Spatial gradient, shape ``(dim, *grid.shape)``."""
    f = np.asarray(f, dtype=float)
    if isinstance(grid, MovingGrid):
        return fd_derivative(f, 1, grid, axis=-1, accuracy=accuracy)[None]
    return np.stack([fd_derivative(f, 1, grid, axis=a, accuracy=accuracy) for a in range(grid.dim)])


def weighted_quadrature(f: npt.ArrayLike, r: npt.ArrayLike, sigma: float, grid: GridLike,
                        mask: npt.ArrayLike | None = None) -> float:
    """Midpoint value of the integral of ``r**(2 sigma) |f|**2`` over the grid.

    ``f`` may carry leading component axes; their squares are summed.
    """
    f = np.asarray(f, dtype=float)
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(f)):
        raise PropagationError("non-finite value in quadrature integrand")
    if np.any(r < 0):
        raise DomainError("weight field must be nonnegative")
    sq = f * f
    while sq.ndim > r.ndim:
        sq = sq.sum(axis=0)
    if sigma == 0:
        w = np.ones_like(r)
    else:
        with np.errstate(divide="ignore"):
            w = np.where(r > 0, r ** (2.0 * sigma), 0.0 if sigma > 0 else np.inf)
    integrand = np.where(sq == 0, 0.0, w * sq)
    if mask is not None:
        integrand = np.where(np.asarray(mask, dtype=bool), integrand, 0.0)
    return float(grid.cell_volume * integrand.sum())


def edge_velocity(u: npt.ArrayLike, grid: MovingGrid, points: int = 5) -> float:
    """Extrapolate the coordinate velocity u^1/u^0 to the left edge from the first ``points`` nodes."""
    u = np.asarray(u, dtype=float)
    v = u[1, :points] / u[0, :points]
    if not np.all(np.isfinite(v)):
        raise PropagationError("non-finite boundary velocity")
    x = grid.nodes[:points]
    # fixed generator: the interpolator shuffles nodes when computing weights
    return float(BarycentricInterpolator(x, v, rng=np.random.default_rng(0))(grid.b))


def advance_boundary(grid: MovingGrid, u: float | npt.ArrayLike | Callable[[float, float], float],
                     dt: float, t: float = 0.0) -> MovingGrid:
    """Move the vacuum edge by one step and regenerate the grid.

    ``u`` is either a constant edge velocity, a 4-velocity field on the grid
    (extrapolated to the edge) or a callable ``v(t, x)`` that is integrated
    along the edge trajectory by RK4.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if callable(u):
        b = grid.b
        k1 = u(t, b)
        k2 = u(t + dt / 2, b + dt / 2 * k1)
        k3 = u(t + dt / 2, b + dt / 2 * k2)
        k4 = u(t + dt, b + dt * k3)
        v = (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    elif np.ndim(u) == 0:
        v = float(u)
    else:
        v = edge_velocity(u, grid)
    if not np.isfinite(v):
        raise PropagationError("non-finite boundary velocity")
    b_new = grid.b + dt * v
    if b_new >= grid.x_far:
        raise DomainCollapseError(f"vacuum edge {b_new} passed the far edge {grid.x_far}")
    return grid.with_edge(b_new)


@dataclass(frozen=True)
class FlowMapState:
    """Samples of the flow map ``eta(tau, y)`` for a set of tracers.

    ``eta`` has shape ``(steps + 1, tracers, dim + 1)`` holding ``(t, x)``;
    exited tracers keep their last in-domain position.
    """

    tau: Array
    y: Array
    eta: Array
    exited: npt.NDArray[np.bool_]
    exit_tau: Array = field(default_factory=lambda: np.zeros(0))

    @property
    def tracer_count(self) -> int:
        return self.y.shape[0]

    @property
    def trajectories(self) -> Array:
        return self.eta


VelocityField = Callable[[float, Array], Array]


def integrate_flow_map(u_field: VelocityField, y0: npt.ArrayLike, T: float, n_steps: int = 200,
                       edges: Callable[[float], tuple[float, float]] | None = None) -> FlowMapState:
    """Integrate d eta/d tau = u(eta) with eta(0, y) = (0, y) by classical RK4 in proper time.

    ``u_field(t, x)`` returns the 4-velocity with shape ``(dim + 1, N)`` for
    per-tracer times ``t`` of shape ``(N,)`` and positions ``x`` of shape
    ``(dim, N)``.  ``edges(t)`` optionally gives the
    1D domain; tracers that leave it are frozen and marked exited.
    """
    y = np.atleast_2d(np.asarray(y0, dtype=float))
    if y.shape[0] == 1 and y.shape[1] > 1:
        y = y.T
    n_tr, dim = y.shape
    if not T > 0 or n_steps < 1:
        raise DomainError("need T > 0 and at least one step")
    dtau = T / n_steps
    state = np.concatenate([np.zeros((n_tr, 1)), y], axis=1)
    eta = np.empty((n_steps + 1, n_tr, dim + 1))
    eta[0] = state
    exited = np.zeros(n_tr, dtype=bool)
    exit_tau = np.full(n_tr, np.nan)

    def rate(s: Array) -> Array:
        u = np.asarray(u_field(s[:, 0], s[:, 1:].T), dtype=float)
        return u.T

    for k in range(n_steps):
        s = eta[k]
        k1 = rate(s)
        k2 = rate(s + dtau / 2 * k1)
        k3 = rate(s + dtau / 2 * k2)
        k4 = rate(s + dtau * k3)
        nxt = s + dtau / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if edges is not None:
            lo, hi = edges(nxt[:, 0])
            out = (nxt[:, 1] < lo) | (nxt[:, 1] > hi)
            newly = out & ~exited
            exit_tau[newly] = (k + 1) * dtau
            exited |= out
        eta[k + 1] = np.where(exited[:, None], s, nxt)
    return FlowMapState(tau=dtau * np.arange(n_steps + 1), y=y, eta=eta, exited=exited, exit_tau=exit_tau)


def transport_theorem_check(f: Callable[[float, Array], Array], velocity: VelocityField,
                            edges: Callable[[float], tuple[float, float]], t: float, dt: float,
                            n_cells: int, with_f: bool = True, accuracy: int = DEFAULT_ACCURACY) -> float:
    """Residual of the moving-domain differentiation formula at time ``t``.

    residual = d/dt int f - int (1/u^0) D_t f - int f d_i(u^i/u^0), with the
    time derivatives taken by central differences over ``t +- dt`` and the
    spatial ones by ``fd_derivative``.  ``with_f=False`` drops the factor f
    from the last integrand.
    """
    def integral(tt: float) -> float:
        b, X = edges(tt)
        g = MovingGrid(b, X, n_cells)
        return g.h * float(np.sum(f(tt, g.nodes)))

    lhs = (integral(t + dt) - integral(t - dt)) / (2 * dt)
    b, X = edges(t)
    g = MovingGrid(b, X, n_cells)
    x = g.nodes
    u = np.asarray(velocity(t, x[None]), dtype=float)
    ft = (f(t + dt, x) - f(t - dt, x)) / (2 * dt)
    fx = fd_derivative(f(t, x), 1, g, accuracy=accuracy)
    v = u[1] / u[0]
    material_over_u0 = ft + v * fx
    div_v = fd_derivative(v, 1, g, accuracy=accuracy)
    last = f(t, x) * div_v if with_f else div_v
    return float(lhs - g.h * np.sum(material_over_u0) - g.h * np.sum(last))
