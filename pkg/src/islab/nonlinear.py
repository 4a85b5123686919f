"""Nonlinear (r, u, pi) system: right-hand sides, characteristic matrices and time stepping.

Matrix fields are stored node-first, ``(n, m, m)`` with ``m = dim + 3`` and
unknowns ordered ``(r, u^0, ..., u^dim, pi)``.

Time stepping uses arbitrary Lagrangian-Eulerian coordinates: the grid is
regenerated on ``[b(t), x_far]`` at every stage, node ``j`` moves with speed
``xdot_j = bdot (x_far - x_j) / (x_far - b)`` and the node values obey
``dU_j/dt = d_t U(x_j) + xdot_j d_x U(x_j)``.  The edge speed ``bdot`` is the
fluid coordinate velocity extrapolated to the edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np
import numpy.typing as npt

from .errors import DomainError, LinearSolveError, NumericalAbort
from .grid import DEFAULT_ACCURACY, EDGE_CELLS, MovingGrid, edge_velocity, fd_derivative
from .model import (R_MIN, ModelConstants, PrimitiveState, TransformedState, causality_check,
                    factored_coefficients, inverse_transform, lower, minkowski, normalize_velocity)

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class FieldState:
    """Samples of (r, u, pi) on a moving grid at time ``t``; ``u`` is the full 4-velocity."""

    grid: MovingGrid
    r: Array
    u: Array
    pi: Array
    t: float = 0.0

    @classmethod
    def from_spatial(cls, grid: MovingGrid, r: npt.ArrayLike, u_spatial: npt.ArrayLike,
                     pi: npt.ArrayLike, t: float = 0.0) -> "FieldState":
        ui = np.atleast_2d(np.asarray(u_spatial, dtype=float))
        return cls(grid, np.asarray(r, dtype=float), normalize_velocity(ui), np.asarray(pi, dtype=float), t)

    @property
    def dim(self) -> int:
        return self.u.shape[0] - 1

    @property
    def transformed(self) -> TransformedState:
        return TransformedState(self.r, self.u, self.pi)

    @property
    def a0(self) -> Array:
        return self.pi / self.r


@dataclass(frozen=True)
class Gradients:
    """Covariant spacetime gradients; ``u[mu, alpha]`` is d_mu u^alpha."""

    r: Array
    u: Array
    pi: Array

    @property
    def div_u(self) -> Array:
        return np.einsum("mm...->...", self.u)


@dataclass(frozen=True)
class SpatialGradients:
    """Spatial gradients only: ``r[i]``, ``u[i, alpha]``, ``pi[i]``."""

    r: Array
    u: Array
    pi: Array


@dataclass(frozen=True)
class TimeDerivatives:
    r: Array
    u: Array
    pi: Array


@dataclass(frozen=True)
class NonlinearRHS:
    """Material derivatives D_t r, D_t u^alpha, D_t pi."""

    dr: Array
    du: Array
    dpi: Array


@dataclass(frozen=True)
class CharacteristicMatrices:
    """A^0, A^i (one per spatial direction) and B, node-first."""

    A0: Array
    Ai: Array
    B: Array

    def inverse_A0(self) -> Array:
        return solve_nodes(self.A0, np.broadcast_to(np.eye(self.A0.shape[-1]), self.A0.shape).copy())


def solve_nodes(A: Array, rhs: Array) -> Array:
    """Solve one small dense system per node: ``A`` (n, m, m), ``rhs`` (n, m) or (n, m, k)."""
    try:
        det = np.linalg.det(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numpy raises only on malformed input
        raise LinearSolveError(str(exc)) from exc
    scale = np.prod(np.max(np.abs(A), axis=2), axis=1)
    bad = ~(np.abs(det) > 1e-14 * scale)
    if np.any(bad):
        raise LinearSolveError(f"A^0 singular at {int(bad.sum())} node(s), first index {int(np.argmax(bad))}")
    if rhs.ndim == 2:
        return np.linalg.solve(A, rhs[..., None])[..., 0]
    return np.linalg.solve(A, rhs)


def spatial_gradients(state: FieldState, accuracy: int = DEFAULT_ACCURACY) -> SpatialGradients:
    g = state.grid
    gr = fd_derivative(state.r, 1, g, accuracy=accuracy)[None]
    gu = fd_derivative(state.u, 1, g, axis=-1, accuracy=accuracy)[None]
    gp = fd_derivative(state.pi, 1, g, accuracy=accuracy)[None]
    return SpatialGradients(gr, gu, gp)


def full_gradients(spatial: SpatialGradients, time: TimeDerivatives) -> Gradients:
    return Gradients(np.concatenate([time.r[None], spatial.r]),
                     np.concatenate([time.u[None], spatial.u]),
                     np.concatenate([time.pi[None], spatial.pi]))


def _projector(u: Array) -> Array:
    dim = u.shape[0] - 1
    g = minkowski(dim).reshape((dim + 1, dim + 1) + (1,) * (u.ndim - 1))
    return g + u[:, None] * u[None, :]


def nonlinear_rhs(ts: TransformedState, grads: Gradients, c: ModelConstants,
                  r_min: float = R_MIN) -> NonlinearRHS:
    """Material-derivative right-hand sides, evaluated through the factored coefficients."""
    fc = factored_coefficients(ts.r, ts.pi, c, r_min)
    div = grads.div_u
    delta = _projector(ts.u)
    grad_r_up = np.einsum("am...,m...->a...", delta, grads.r)
    grad_pi_up = np.einsum("am...,m...->a...", delta, grads.pi)
    dr = -fc.kra1 * div
    du = -fc.cr * grad_r_up - fc.cpi * grad_pi_up
    dpi = -fc.relax * ts.pi - fc.ra4 * div
    return NonlinearRHS(dr, du, dpi)


def assemble_matrices(ts: TransformedState, c: ModelConstants, r_min: float = R_MIN) -> CharacteristicMatrices:
    """A^mu d_mu U + B U = 0 written for U = (r, u, pi)."""
    u = np.asarray(ts.u, dtype=float)
    dim = u.shape[0] - 1
    n = u.shape[1]
    m = dim + 3
    fc = factored_coefficients(ts.r, ts.pi, c, r_min)
    delta = _projector(u)
    A = np.zeros((dim + 1, n, m, m))
    diag = np.arange(m)
    for mu in range(dim + 1):
        A[mu][:, diag, diag] = u[mu][:, None]
        A[mu][:, 0, 1 + mu] = fc.kra1
        A[mu][:, 1:dim + 2, 0] = (fc.cr * delta[:, mu]).T
        A[mu][:, 1:dim + 2, m - 1] = (fc.cpi * delta[:, mu]).T
        A[mu][:, m - 1, 1 + mu] = fc.ra4
    B = np.zeros((n, m, m))
    B[:, m - 1, m - 1] = fc.relax
    return CharacteristicMatrices(A[0], A[1:], B)


def stack_fields(ts: TransformedState) -> Array:
    """Node-first unknown vector (n, m)."""
    return np.concatenate([np.asarray(ts.r)[None], np.asarray(ts.u), np.asarray(ts.pi)[None]]).T


def _stack_spatial(sg: SpatialGradients) -> Array:
    """(dim, n, m) spatial derivative of the unknown vector."""
    return np.concatenate([sg.r[:, None], sg.u, sg.pi[:, None]], axis=1).transpose(0, 2, 1)


def recover_time_derivatives(ts: TransformedState, spatial: SpatialGradients, c: ModelConstants,
                             matrices: CharacteristicMatrices | None = None) -> TimeDerivatives:
    """d_t U = -(A^0)^-1 [A^i d_i U + B U] node by node."""
    mats = matrices if matrices is not None else assemble_matrices(ts, c)
    U = stack_fields(ts)
    dU = _stack_spatial(spatial)
    rhs = -np.einsum("inab,inb->na", mats.Ai, dU) - np.einsum("nab,nb->na", mats.B, U)
    dt = solve_nodes(mats.A0, rhs).T
    return TimeDerivatives(dt[0], dt[1:-1], dt[-1])


# ---------------------------------------------------------------- time stepping

FarBoundary = Literal["pinned", "frozen", "free"]


@dataclass(frozen=True)
class EvolutionOptions:
    cfl: float = 0.4
    accuracy: int = DEFAULT_ACCURACY
    far_bc: FarBoundary = "pinned"
    move_boundary: bool = True
    snapshot_every: int = 0
    check_causality: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.cfl < 1:
            raise DomainError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.far_bc not in ("pinned", "frozen", "free"):
            raise DomainError(f"unknown far boundary mode {self.far_bc!r}")


FAR_BC_NOTES = {
    "pinned": "last two cells follow the spatially homogeneous background (relaxation only)",
    "frozen": "last two cells held at their initial values",
    "free": "one-sided stencils, no condition imposed at the far edge",
}


def cfl_dt(grid: MovingGrid, cfl: float = 0.4) -> float:
    """Stable step C_cfl * h; signal speeds are at most 1 under the causality condition."""
    return cfl * grid.h


@dataclass(frozen=True)
class StageRates:
    bdot: float
    r: Array
    ui: Array
    pi: Array
    time: TimeDerivatives
    spatial: SpatialGradients


def node_speeds(grid: MovingGrid, bdot: float) -> Array:
    return bdot * (grid.x_far - grid.nodes) / (grid.x_far - grid.b)


def stage_rates(state: FieldState, c: ModelConstants, opts: EvolutionOptions) -> StageRates:
    """ALE rates of all node values and the edge position."""
    sg = spatial_gradients(state, opts.accuracy)
    td = recover_time_derivatives(state.transformed, sg, c)
    bdot = edge_velocity(state.u, state.grid) if opts.move_boundary else 0.0
    xdot = node_speeds(state.grid, bdot)
    rr = td.r + xdot * sg.r[0]
    ru = td.u[1:] + xdot * sg.u[0, 1:]
    rp = td.pi + xdot * sg.pi[0]
    far = slice(-EDGE_CELLS, None)
    if opts.far_bc == "frozen":
        rr[far] = 0.0
        ru[:, far] = 0.0
        rp[far] = 0.0
    elif opts.far_bc == "pinned":
        # far cells follow the spatially homogeneous background: gradients dropped
        fc = factored_coefficients(state.r[far], state.pi[far], c)
        rr[far] = 0.0
        ru[:, far] = 0.0
        rp[far] = -fc.relax * state.pi[far] / state.u[0, far]
    return StageRates(bdot, rr, ru, rp, td, sg)


def _offset(state: FieldState, k: StageRates, dt: float) -> FieldState:
    grid = state.grid.with_edge(state.grid.b + dt * k.bdot) if k.bdot else state.grid
    return FieldState.from_spatial(grid, state.r + dt * k.r, state.u[1:] + dt * k.ui, state.pi + dt * k.pi,
                                   state.t + dt)


def rk4_step(state: FieldState, dt: float, c: ModelConstants, opts: EvolutionOptions = EvolutionOptions(),
             step: int = 0) -> FieldState:
    """One classical RK4 step of fields and edge position."""
    k1 = stage_rates(state, c, opts)
    k2 = stage_rates(_offset(state, k1, dt / 2), c, opts)
    k3 = stage_rates(_offset(state, k2, dt / 2), c, opts)
    k4 = stage_rates(_offset(state, k3, dt), c, opts)
    w = dt / 6.0
    bdot = (k1.bdot + 2 * k2.bdot + 2 * k3.bdot + k4.bdot) / 6.0
    r = state.r + w * (k1.r + 2 * k2.r + 2 * k3.r + k4.r)
    ui = state.u[1:] + w * (k1.ui + 2 * k2.ui + 2 * k3.ui + k4.ui)
    pi = state.pi + w * (k1.pi + 2 * k2.pi + 2 * k3.pi + k4.pi)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(ui)) and np.all(np.isfinite(pi)) and np.isfinite(bdot)):
        raise NumericalAbort("non-finite field values", step, state.t + dt)
    grid = state.grid.with_edge(state.grid.b + dt * bdot) if bdot else state.grid
    return FieldState.from_spatial(grid, r, ui, pi, state.t + dt)


@dataclass
class SimulationResult:
    times: list[float]
    states: list[FieldState]
    dt: float
    steps: int
    metadata: dict = field(default_factory=dict)

    @property
    def final(self) -> FieldState:
        return self.states[-1]


def simulate(state0: FieldState, c: ModelConstants, T: float, opts: EvolutionOptions = EvolutionOptions(),
             dt: float | None = None, observer: Callable[[int, FieldState], None] | None = None) -> SimulationResult:
    """Evolve to time ``state0.t + T`` with a fixed step that lands exactly on the final time."""
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    if opts.check_causality:
        prim = inverse_transform(state0.transformed, c)
        margin = causality_check(PrimitiveState(prim.rho, prim.u, prim.Pi), c)
        if np.min(margin[state0.grid.interior_mask]) < 0:
            raise DomainError("initial data violate the causality condition on the interior")
    base = dt if dt is not None else cfl_dt(state0.grid, opts.cfl)
    steps = int(np.ceil(T / base - 1e-12))
    step_dt = T / steps
    state = state0
    times, states = [state.t], [state]
    if observer is not None:
        observer(0, state)
    for k in range(1, steps + 1):
        state = rk4_step(state, step_dt, c, opts, step=k)
        if observer is not None:
            observer(k, state)
        if (opts.snapshot_every and k % opts.snapshot_every == 0) or k == steps:
            times.append(state.t)
            states.append(state)
    meta = {"dt": step_dt, "steps": steps, "far_boundary": opts.far_bc,
            "far_boundary_note": FAR_BC_NOTES[opts.far_bc],
            "move_boundary": opts.move_boundary, "cfl": opts.cfl, "accuracy": opts.accuracy}
    return SimulationResult(times, states, step_dt, steps, meta)


# ---------------------------------------------------------------- coefficient ODEs

@dataclass(frozen=True)
class CoefficientRates:
    d_a0: Array
    d_inv_a0: Array
    d_zeta_ratio: Array


def coefficient_ode_rhs(a0: npt.ArrayLike, r: npt.ArrayLike, pi: npt.ArrayLike, div_u: npt.ArrayLike,
                        c: ModelConstants, form: Literal["derived", "printed"] = "derived") -> CoefficientRates:
    """Material derivatives of a0, 1/a0 and zeta(r^(1/k))/r^(2+1/k) implied by the system.

    ``form="derived"`` follows from the r and pi equations by the chain rule.
    ``form="printed"`` reproduces the typeset expressions, in which the
    kappa-terms of the first two rates appear without the divergence factor.
    """
    a0 = np.asarray(a0, dtype=float)
    r = np.asarray(r, dtype=float)
    pi = np.asarray(pi, dtype=float)
    div = np.asarray(div_u, dtype=float)
    k = c.kappa
    s = c.relaxation_factor
    rho = r ** (1 / k)
    lam = c.lam(rho)
    zeta = c.zeta(rho)
    a4 = zeta / (r * pi ** (1 + 1 / k))
    q = lam * r ** (2 + 1 / k)
    a1 = r + 1.0 + r**2 * a0 ** (2 + 1 / k)
    zr = (rho * c.dzeta(rho) - (2 * k + 1) * zeta) / r ** (2 + 1 / k)
    d_zeta_ratio = -a1 * div * zr
    if form == "printed":
        d_a0 = (k * (r + 1) - 1) * a0 + (k * r**2 - q) * a0 ** (3 + 1 / k) - a4 * div
        d_inv = (1 - k * (r + 1)) / a0 + (q - k * r**2) * a0 ** (1 + 1 / k) + zeta * r / pi ** (3 + 1 / k) * div
        return CoefficientRates(d_a0, d_inv, d_zeta_ratio)
    if form != "derived":
        raise DomainError(f"unknown form {form!r}")
    d_a0 = -s * a0 - s * q * a0 ** (3 + 1 / k) + (k * (r + 1) * a0 + k * r**2 * a0 ** (3 + 1 / k) - s * a4) * div
    d_inv = s / a0 + s * q * a0 ** (1 + 1 / k) + (s * zeta * r / pi ** (3 + 1 / k) - k * (r + 1) / a0
                                                 - k * r**2 * a0 ** (1 + 1 / k)) * div
    return CoefficientRates(d_a0, d_inv, d_zeta_ratio)


# ---------------------------------------------------------------- manufactured backgrounds

SpaceTimeFn = Callable[[float, Array], Array]


@dataclass(frozen=True)
class ManufacturedBackground:
    """Prescribed background fields as callables of (t, x); ``u_spatial`` returns shape (dim, n).

    Time derivatives default to central differences with step ``dt_fd``.
    """

    r: SpaceTimeFn
    u_spatial: SpaceTimeFn
    pi: SpaceTimeFn
    static: bool = False
    dt_fd: float = 1e-5

    def state(self, grid: MovingGrid, t: float = 0.0) -> FieldState:
        x = grid.nodes
        return FieldState.from_spatial(grid, self.r(t, x), np.atleast_2d(self.u_spatial(t, x)), self.pi(t, x), t)

    def time_derivatives(self, grid: MovingGrid, t: float = 0.0) -> TimeDerivatives:
        x = grid.nodes
        if self.static:
            z = np.zeros_like(x)
            dim = np.atleast_2d(self.u_spatial(t, x)).shape[0]
            return TimeDerivatives(z, np.zeros((dim + 1, x.size)), z.copy())
        h = self.dt_fd
        fwd, bwd = self.state(grid, t + h), self.state(grid, t - h)
        return TimeDerivatives((fwd.r - bwd.r) / (2 * h), (fwd.u - bwd.u) / (2 * h), (fwd.pi - bwd.pi) / (2 * h))

    def gradients(self, grid: MovingGrid, t: float = 0.0, accuracy: int = DEFAULT_ACCURACY) -> Gradients:
        return full_gradients(spatial_gradients(self.state(grid, t), accuracy), self.time_derivatives(grid, t))


@dataclass(frozen=True)
class ManufacturedResidual:
    r: Array
    u: Array
    pi: Array

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.r)), np.max(np.abs(self.u)), np.max(np.abs(self.pi))))


def manufactured_residual(bg: ManufacturedBackground, grid: MovingGrid, c: ModelConstants, t: float = 0.0,
                          accuracy: int = DEFAULT_ACCURACY) -> ManufacturedResidual:
    """Residual u^mu d_mu U - D_t U(rhs) of each nonlinear equation for the candidate fields."""
    st = bg.state(grid, t)
    grads = bg.gradients(grid, t, accuracy)
    rhs = nonlinear_rhs(st.transformed, grads, c)
    u = st.u
    mat_r = np.einsum("m...,m...->...", u, grads.r)
    mat_u = np.einsum("m...,ma...->a...", u, grads.u)
    mat_pi = np.einsum("m...,m...->...", u, grads.pi)
    return ManufacturedResidual(mat_r - rhs.dr, mat_u - rhs.du, mat_pi - rhs.dpi)


def material_derivative(u: Array, grad: Array) -> Array:
    """u^mu d_mu applied to a covariant gradient (leading index mu)."""
    return np.einsum("m...,m...->...", u, grad)


def lower_index(v: Array) -> Array:
    return lower(v)


def with_time(state: FieldState, t: float) -> FieldState:
    return replace(state, t=t)


# ---------------------------------------------------------------- coefficient-bound persistence

@dataclass(frozen=True)
class CoefficientSup:
    a0: float
    inv_a0: float
    zeta_ratio: float

    @classmethod
    def of(cls, state: FieldState, c: ModelConstants) -> "CoefficientSup":
        a0 = state.pi / state.r
        rho = state.r ** (1 / c.kappa)
        z = c.zeta(rho) / state.r ** (2 + 1 / c.kappa)
        return cls(float(np.max(a0)), float(np.max(1 / a0)), float(np.max(z)))

    def as_tuple(self) -> tuple[float, float, float]:
        return self.a0, self.inv_a0, self.zeta_ratio


@dataclass
class CoefficientBoundReport:
    initial: CoefficientSup
    T_star: float
    rate_bound: float
    times: Array
    ratios: Array  # (steps, 3): sup X(t) / sup X(0)
    background: dict
    simulated_to: float

    @property
    def max_ratio(self) -> float:
        mask = self.times <= self.T_star
        return float(np.max(self.ratios[mask]))

    @property
    def passed(self) -> bool:
        return self.simulated_to >= self.T_star and self.max_ratio <= 2.0


def coefficient_rate_bound(init: CoefficientSup, R: float, lam_max: float, div_max: float,
                           zeta_flux_max: float, c: ModelConstants) -> float:
    """Upper bound on |D_t a0|, |D_t(1/a0)|, |D_t zeta/r^(2+1/k)| while each stays within twice its initial sup."""
    k = c.kappa
    s = c.relaxation_factor
    A, B, Z = 2 * init.a0, 2 * init.inv_a0, 2 * init.zeta_ratio
    q = lam_max * R ** (2 + 1 / k)
    a4 = Z * B ** (1 + 1 / k)
    da0 = s * A + s * q * A ** (3 + 1 / k) + (k * (R + 1) * A + k * R**2 * A ** (3 + 1 / k) + s * a4) * div_max
    dinv = s * B + s * q * A ** (1 + 1 / k) + (s * Z * B ** (3 + 1 / k) + k * (R + 1) * B
                                               + k * R**2 * A ** (1 + 1 / k)) * div_max
    a1 = R + 1 + R**2 * A ** (2 + 1 / k)
    dz = a1 * div_max * zeta_flux_max
    return float(max(da0, dinv, dz))


def coefficient_bound_experiment(state0: FieldState, c: ModelConstants, opts: EvolutionOptions = EvolutionOptions(),
                                 T_max: float = 2.0, safety: float = 0.99) -> CoefficientBoundReport:
    """Evolve and check that sup a0, sup 1/a0 and sup zeta/r^(2+1/k) stay within factor 2 up to T*.

    T* = safety * min(sup X(0)) / (2 C), with C the rate bound built from the
    sups of r, lambda, |d_m u^m| and |rho zeta' - (2k+1) zeta| / r^(2+1/k)
    measured over the simulated window.  The window is extended until it
    covers T* (the measured sups only grow, so T* only shrinks)."""
    k = c.kappa
    init = CoefficientSup.of(state0, c)
    times: list[float] = []
    ratios: list[tuple[float, float, float]] = []
    sups = {"R": 0.0, "lam": 0.0, "div": 0.0, "zflux": 0.0}

    def observe(state: FieldState) -> None:
        cur = CoefficientSup.of(state, c)
        times.append(state.t - state0.t)
        ratios.append(tuple(a / b for a, b in zip(cur.as_tuple(), init.as_tuple())))
        sg = spatial_gradients(state, opts.accuracy)
        td = recover_time_derivatives(state.transformed, sg, c)
        div = full_gradients(sg, td).div_u
        rho = state.r ** (1 / k)
        zf = np.abs(rho * c.dzeta(rho) - (2 * k + 1) * c.zeta(rho)) / state.r ** (2 + 1 / k)
        sups["R"] = max(sups["R"], float(np.max(state.r)))
        sups["lam"] = max(sups["lam"], float(np.max(np.abs(c.lam(rho)))))
        sups["div"] = max(sups["div"], float(np.max(np.abs(div))))
        sups["zflux"] = max(sups["zflux"], float(np.max(zf)))

    def t_star() -> tuple[float, float]:
        C = coefficient_rate_bound(init, sups["R"], sups["lam"], sups["div"], sups["zflux"], c)
        return safety * 0.5 * min(init.as_tuple()) / C, C

    state = state0
    observe(state)
    window = min(T_max, 0.25)
    T_s, C = t_star()
    while True:
        res = simulate(state, c, window - (state.t - state0.t), opts,
                       observer=lambda i, s: observe(s) if i > 0 else None)
        state = res.final
        T_s, C = t_star()
        done = state.t - state0.t
        if done >= T_s or done >= T_max:
            break
        window = min(T_max, max(T_s * 1.05, done + 0.1))
    return CoefficientBoundReport(init, T_s, C, np.array(times), np.array(ratios), dict(sups), state.t - state0.t)
