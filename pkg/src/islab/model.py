"""Physical model layer for the barotropic Israel-Stewart fluid.

Conventions
-----------
Minkowski signature (-,+,+,+).  Vector fields are arrays whose leading axis is
the spacetime index (upper components, ``u[0]`` is the time component); the
remaining axes run over grid nodes.  Covariant gradients are stored the same
way, ``grad[mu]`` holding the partial derivative along coordinate ``mu``.

The equation of state is ``p = rho**(kappa+1)`` and the fluid is evolved in the
variables ``r = rho**kappa`` and ``pi = Pi**(kappa/(2 kappa + 1))``, in which
both fields vanish linearly at a physical vacuum edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
import numpy.typing as npt

from .errors import DegeneracyError, DomainError

ArrayLike = npt.ArrayLike
Array = npt.NDArray[np.float64]
ScalarFn = Callable[[Array], Array]

R_MIN = 1e-10
"""Working-range guard: coefficient evaluation refuses r or pi below this."""

CLASSIFY_TOL = 1e-9


def minkowski(dim: int) -> Array:
    """Return the metric diag(-1, 1, ..., 1) for ``dim`` spatial dimensions."""
    g = np.eye(dim + 1)
    g[0, 0] = -1.0
    return g


def lower(v: Array) -> Array:
    """Lower the leading (spacetime) index of a vector field."""
    out = np.array(v, dtype=float, copy=True)
    out[0] = -out[0]
    return out


def _central_derivative(fn: ScalarFn) -> ScalarFn:
    def deriv(rho: Array) -> Array:
        rho = np.asarray(rho, dtype=float)
        step = 1e-6 * np.maximum(1.0, np.abs(rho))
        lo = np.maximum(rho - step, 0.0)
        hi = lo + 2.0 * step
        return (fn(hi) - fn(lo)) / (hi - lo)

    return deriv


@dataclass(frozen=True)
class ModelConstants:
    """Constants and transport functions of the model.

    The defaults are ``zeta(rho) = zeta0 * rho**(2 kappa + 1)`` and
    ``lambda(rho) = lambda0 / (1 + rho)``.  Custom transport functions may be
    supplied together with their derivatives; missing derivatives fall back to
    central differences.
    """

    kappa: float = 1.0
    tau_pi: float | None = None
    lambda0: float = 1.0
    zeta0: float = 1.0
    dim: int = 1
    lambda_fn: ScalarFn | None = field(default=None, compare=False)
    zeta_fn: ScalarFn | None = field(default=None, compare=False)
    lambda_prime: ScalarFn | None = field(default=None, compare=False)
    zeta_prime: ScalarFn | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not np.isfinite(self.kappa) or self.kappa <= 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if self.tau_pi is None:
            object.__setattr__(self, "tau_pi", self.default_tau)
        if not np.isfinite(self.tau_pi) or self.tau_pi <= 0:
            raise DomainError(f"tau_pi must be positive, got {self.tau_pi}")
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.zeta_fn is None and self.zeta0 <= 0:
            raise DomainError(f"zeta0 must be positive, got {self.zeta0}")

    @property
    def default_tau(self) -> float:
        """Relaxation time 1/(2 + 1/kappa) for which the transformed system is exact."""
        return 1.0 / (2.0 + 1.0 / self.kappa)

    @property
    def relaxation_factor(self) -> float:
        """Factor multiplying the non-transport part of the pi equation (1 at the default tau)."""
        return self.default_tau / self.tau_pi

    def lam(self, rho: ArrayLike) -> Array:
        rho = np.asarray(rho, dtype=float)
        if self.lambda_fn is not None:
            return np.asarray(self.lambda_fn(rho), dtype=float)
        return self.lambda0 / (1.0 + rho)

    def dlam(self, rho: ArrayLike) -> Array:
        rho = np.asarray(rho, dtype=float)
        if self.lambda_fn is not None:
            fn = self.lambda_prime or _central_derivative(self.lambda_fn)
            return np.asarray(fn(rho), dtype=float)
        return -self.lambda0 / (1.0 + rho) ** 2

    def zeta(self, rho: ArrayLike) -> Array:
        rho = np.asarray(rho, dtype=float)
        if self.zeta_fn is not None:
            return np.asarray(self.zeta_fn(rho), dtype=float)
        return self.zeta0 * rho ** (2.0 * self.kappa + 1.0)

    def dzeta(self, rho: ArrayLike) -> Array:
        rho = np.asarray(rho, dtype=float)
        if self.zeta_fn is not None:
            fn = self.zeta_prime or _central_derivative(self.zeta_fn)
            return np.asarray(fn(rho), dtype=float)
        return self.zeta0 * (2.0 * self.kappa + 1.0) * rho ** (2.0 * self.kappa)

    def pressure(self, rho: ArrayLike) -> Array:
        return np.asarray(rho, dtype=float) ** (self.kappa + 1.0)

    def check_transport(self, rho_max: float = 1.0, samples: int = 257) -> tuple[float, float, float]:
        """Sample the working range and return (min, max) of zeta/rho^(2k+1) and max |lambda'|.

        Raises ``DomainError`` if the zeta ratio is not bounded away from zero
        or the lambda derivative is not finite.
        """
        rho = np.linspace(rho_max / samples, rho_max, samples)
        ratio = self.zeta(rho) / rho ** (2.0 * self.kappa + 1.0)
        dl = np.abs(self.dlam(rho))
        if not (np.all(np.isfinite(ratio)) and ratio.min() > 0):
            raise DomainError("zeta(rho)/rho^(2 kappa+1) is not bounded below by a positive constant")
        if not np.all(np.isfinite(dl)):
            raise DomainError("lambda has an unbounded derivative on the working range")
        return float(ratio.min()), float(ratio.max()), float(dl.max())


@dataclass(frozen=True)
class PrimitiveState:
    """Energy density, 4-velocity and bulk scalar sampled on grid nodes."""

    rho: Array
    u: Array
    Pi: Array


@dataclass(frozen=True)
class TransformedState:
    """The evolved variables (r, u, pi) sampled on grid nodes."""

    r: Array
    u: Array
    pi: Array

    @property
    def dim(self) -> int:
        return self.u.shape[0] - 1


@dataclass(frozen=True)
class CoefficientSet:
    """The five coefficient fields of the nonlinear system."""

    a0: Array
    a1: Array
    a2: Array
    a3: Array
    a4: Array


def normalize_velocity(spatial_u: ArrayLike) -> Array:
    """Complete spatial components u^i to a unit timelike 4-velocity."""
    ui = np.atleast_1d(np.asarray(spatial_u, dtype=float))
    u0 = np.sqrt(1.0 + np.sum(ui * ui, axis=0))
    return np.concatenate([u0[None], ui], axis=0)


def normalization_residual(u: Array) -> Array:
    """Pointwise |u^mu u_mu + 1|."""
    return np.abs(-u[0] ** 2 + np.sum(u[1:] ** 2, axis=0) + 1.0)


def projection_tensor(u: ArrayLike, tol: float = 1e-8) -> Array:
    """Projector Delta^{ab} = g^{ab} + u^a u^b onto the u-orthogonal subspace."""
    u = np.asarray(u, dtype=float)
    if np.max(normalization_residual(u)) > tol:
        raise DomainError("velocity is not normalized (u^mu u_mu != -1)")
    dim = u.shape[0] - 1
    g = minkowski(dim).reshape((dim + 1, dim + 1) + (1,) * (u.ndim - 1))
    return g + u[:, None] * u[None, :]


def stress_energy(state: PrimitiveState, c: ModelConstants) -> Array:
    """Covariant stress-energy T_{mn} = rho u_m u_n + (p + Pi) Delta_{mn}."""
    u = np.asarray(state.u, dtype=float)
    dim = u.shape[0] - 1
    ul = lower(u)
    g = minkowski(dim).reshape((dim + 1, dim + 1) + (1,) * (u.ndim - 1))
    delta_low = g + ul[:, None] * ul[None, :]
    rho = np.asarray(state.rho, dtype=float)
    p = c.pressure(rho) + np.asarray(state.Pi, dtype=float)
    return rho * ul[:, None] * ul[None, :] + p * delta_low


def transform(state: PrimitiveState, c: ModelConstants) -> TransformedState:
    """Map (rho, u, Pi) to (r, u, pi)."""
    rho = np.asarray(state.rho, dtype=float)
    Pi = np.asarray(state.Pi, dtype=float)
    if np.any(rho < 0) or np.any(Pi < 0):
        raise DomainError("rho and Pi must be nonnegative for the (r, pi) transform")
    k = c.kappa
    return TransformedState(r=rho**k, u=np.asarray(state.u, dtype=float), pi=Pi ** (k / (2 * k + 1)))


def inverse_transform(ts: TransformedState, c: ModelConstants) -> PrimitiveState:
    """Map (r, u, pi) back to (rho, u, Pi)."""
    r = np.asarray(ts.r, dtype=float)
    pi = np.asarray(ts.pi, dtype=float)
    if np.any(r < 0) or np.any(pi < 0):
        raise DomainError("r and pi must be nonnegative")
    k = c.kappa
    return PrimitiveState(rho=r ** (1 / k), u=np.asarray(ts.u, dtype=float), Pi=pi ** ((2 * k + 1) / k))


def coefficients(ts: TransformedState, c: ModelConstants, r_min: float = R_MIN) -> CoefficientSet:
    """Evaluate a0..a4 at nodes where r and pi are at least ``r_min``."""
    r = np.asarray(ts.r, dtype=float)
    pi = np.asarray(ts.pi, dtype=float)
    if np.any(r < r_min) or np.any(pi < r_min):
        raise DegeneracyError("coefficients requested at a node with r or pi below r_min; use the interior mask")
    k = c.kappa
    a0 = pi / r
    a1 = r + 1.0 + r**2 * a0 ** (2 + 1 / k)
    a2 = 1.0 / a1
    a3 = a0 ** (1 + 1 / k) * a2
    a4 = c.zeta(r ** (1 / k)) / (r * pi ** (1 + 1 / k))
    return CoefficientSet(a0=a0, a1=a1, a2=a2, a3=a3, a4=a4)


@dataclass(frozen=True)
class FactoredCoefficients:
    """Coefficient combinations that stay finite at degenerate nodes.

    ``kra1 = kappa r a1``, ``cr = (1+1/kappa) a2``, ``cpi = (2+1/kappa) r a3``,
    ``ra4 = r a4`` (already scaled by the relaxation factor) and
    ``relax = s (1 + lambda pi^(2+1/kappa))``.
    """

    kra1: Array
    cr: Array
    cpi: Array
    ra4: Array
    relax: Array


def factored_coefficients(r: ArrayLike, pi: ArrayLike, c: ModelConstants, r_min: float = R_MIN) -> FactoredCoefficients:
    """Coefficients in the combinations that enter the equations.

    Nodes with r below ``r_min`` take the vacuum limit (pi ~ r), in which
    r^2 a0^(2+1/k), r a3 and r a4 vanish.  Nodes with pi below ``r_min`` but
    r above it carry no bulk source (r a4 -> 0), which is exact for the
    Pi = 0 equilibrium and flagged as a modeling choice otherwise.
    """
    r = np.asarray(r, dtype=float)
    pi = np.asarray(pi, dtype=float)
    k = c.kappa
    s = c.relaxation_factor
    live = r >= r_min
    rs = np.where(live, r, 1.0)
    q = np.where(live, np.maximum(pi, 0.0) ** (2 + 1 / k) / rs ** (1 / k), 0.0)  # r^2 a0^(2+1/k)
    a1 = r + 1.0 + q
    kra1 = k * (r * (r + 1.0) + r * q)
    cr = (1 + 1 / k) / a1
    cpi = np.where(live, (2 + 1 / k) * np.maximum(pi, 0.0) ** (1 + 1 / k) / (rs ** (1 / k) * a1), 0.0)
    pos = pi >= r_min
    ps = np.where(pos, pi, 1.0)
    ra4 = np.where(pos & live, s * c.zeta(np.maximum(r, 0.0) ** (1 / k)) / ps ** (1 + 1 / k), 0.0)
    relax = s * (1.0 + c.lam(np.maximum(r, 0.0) ** (1 / k)) * np.maximum(pi, 0.0) ** (2 + 1 / k))
    return FactoredCoefficients(kra1=kra1, cr=cr, cpi=cpi, ra4=ra4, relax=relax)


def causality_check(state: PrimitiveState, c: ModelConstants) -> Array:
    """Causality margin [1 - dp/drho] - zeta/(tau (rho + p + Pi)); nonnegative means causal.

    At an exact vacuum node (rho + p + Pi = 0 with zeta = 0) the viscous term
    is taken at its limit 0, so the margin is 1.
    """
    rho = np.asarray(state.rho, dtype=float)
    Pi = np.asarray(state.Pi, dtype=float)
    if np.any(rho < 0):
        raise DomainError("rho must be nonnegative")
    enthalpy = rho + c.pressure(rho) + Pi
    zeta = c.zeta(rho)
    vacuum = (enthalpy == 0) & (zeta == 0)
    if np.any((enthalpy <= 0) & ~vacuum):
        raise DegeneracyError("rho + p + Pi <= 0: degenerate enthalpy")
    sound = (c.kappa + 1.0) * rho**c.kappa
    viscous = np.where(vacuum, 0.0, zeta / (c.tau_pi * np.where(vacuum, 1.0, enthalpy)))
    return 1.0 - sound - viscous


def four_acceleration(ts: TransformedState, grad_r: Array, grad_pi: Array, c: ModelConstants) -> Array:
    """4-acceleration a^a from the momentum equation.

    ``grad_r`` and ``grad_pi`` are covariant spacetime gradients of r and pi.
    a^a = -[(k+1) rho^k Delta^{am} d_m rho + Delta^{am} d_m Pi] / (rho^(k+1) + rho + Pi).
    """
    k = c.kappa
    r = np.asarray(ts.r, dtype=float)
    pi = np.asarray(ts.pi, dtype=float)
    rho = r ** (1 / k)
    Pi = pi ** (2 + 1 / k)
    denom = rho ** (k + 1) + rho + Pi
    if np.any(denom <= 0):
        raise DegeneracyError("vanishing enthalpy in the 4-acceleration")
    with np.errstate(divide="ignore", invalid="ignore"):
        drho = np.where(r > 0, (1 / k) * r ** (1 / k - 1), 0.0) * grad_r
    dPi = (2 + 1 / k) * pi ** (1 + 1 / k) * grad_pi
    delta = projection_tensor(ts.u)
    force = (k + 1) * rho**k * drho + dPi
    return -np.einsum("am...,m...->a...", delta, force) / denom


BoundaryClass = Literal["bounded-nonzero", "zero", "unbounded"]


def classify_boundary(sigma: float, eta: float, kappa: float, tol: float = CLASSIFY_TOL) -> BoundaryClass:
    """Classify the edge acceleration for rho ~ d^sigma and Pi ~ d^eta.

    The acceleration scales with the exponents sigma*kappa - 1 (pressure) and
    eta - sigma - 1 (bulk stress); it is unbounded when sigma > eta or the
    dominant exponent is negative, vanishes when both are positive, and is
    bounded and nonzero otherwise.
    """
    if sigma <= 0 or eta <= 0 or kappa <= 0:
        raise DomainError("decay exponents and kappa must be positive")
    if sigma > eta + tol:
        return "unbounded"
    e_pressure = sigma * kappa - 1.0
    e_bulk = eta - sigma - 1.0
    if min(e_pressure, e_bulk) < -tol:
        return "unbounded"
    if e_pressure > tol and e_bulk > tol:
        return "zero"
    return "bounded-nonzero"


def fit_decay_exponents(values: ArrayLike, distance: ArrayLike, min_samples: int = 8) -> tuple[float, float]:
    """Fit values ~ C d^p by least squares in log-log space.

    Returns ``(p, residual)`` with the residual the RMS misfit of the log fit.
    Requires at least ``min_samples`` positive samples spanning a decade.
    """
    f = np.asarray(values, dtype=float).ravel()
    d = np.asarray(distance, dtype=float).ravel()
    if f.size != d.size:
        raise DomainError("values and distance must have the same size")
    if f.size < min_samples:
        raise DomainError(f"need at least {min_samples} samples, got {f.size}")
    if np.any(f <= 0) or np.any(d <= 0):
        raise DomainError("power-law fit requires positive samples")
    if d.max() / d.min() < 10.0 * (1 - 1e-9):
        raise DomainError("distance samples must span at least one decade")
    x, y = np.log(d), np.log(f)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), resid
