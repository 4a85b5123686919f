"""Weighted Sobolev norms, the base and high-order spaces, and the linearized energy.

Weight convention
-----------------
Every weight is stored as the exponent of ``r`` multiplying ``|f|**2`` under
the integral.  An ``H^{j,sigma}`` norm therefore uses exponent ``2 sigma``,
while the weighted L2 space ``L2(r**w)`` uses exponent ``w`` (so
``sigma = w / 2``).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np
import numpy.typing as npt

from .errors import DegeneracyError, PropagationError, SizeError, WeightSpecError
from .grid import DEFAULT_ACCURACY, GridLike, fd_derivative, min_nodes, weighted_quadrature
from .model import ModelConstants, TransformedState

if TYPE_CHECKING:
    from .linearized import LinearizedState

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class WeightedNormSpec:
    """Derivative count ``j`` and weight exponent ``sigma`` of an H^{j,sigma} norm."""

    j: int
    sigma: float

    def __post_init__(self) -> None:
        if int(self.j) != self.j or self.j < 0:
            raise WeightSpecError(f"derivative count must be a nonnegative integer, got {self.j}")
        if not self.sigma > -0.5:
            raise WeightSpecError(f"weight exponent sigma must exceed -1/2, got {self.sigma}")


@dataclass(frozen=True)
class StateNormReport:
    r_norm: float
    u_norm: float
    pi_norm: float
    total: float
    specs: tuple[WeightedNormSpec, WeightedNormSpec, WeightedNormSpec]

    def as_dict(self) -> dict[str, float]:
        return {"r_norm": self.r_norm, "u_norm": self.u_norm, "pi_norm": self.pi_norm, "total": self.total}


def _spatial_axes(f: Array, grid: GridLike) -> list[int]:
    return list(range(f.ndim - grid.dim, f.ndim))


def partial_derivatives(f: npt.ArrayLike, order: int, grid: GridLike,
                        accuracy: int = DEFAULT_ACCURACY) -> Iterable[Array]:
    """Yield d^alpha f for every multi-index |alpha| = order (each multi-index once)."""
    f = np.asarray(f, dtype=float)
    axes = _spatial_axes(f, grid)
    for combo in combinations_with_replacement(range(grid.dim), order):
        g = f
        counts = [combo.count(a) for a in range(grid.dim)]
        for a, k in enumerate(counts):
            while k >= 2:
                g = fd_derivative(g, 2, grid, axis=axes[a], accuracy=accuracy)
                k -= 2
            if k:
                g = fd_derivative(g, 1, grid, axis=axes[a], accuracy=accuracy)
        yield g


def _check_support(f: Array, j: int, grid: GridLike, accuracy: int) -> None:
    if j == 0:
        return
    n = min(f.shape[a] for a in _spatial_axes(f, grid))
    need = min_nodes(2 if j >= 2 else 1, accuracy)
    if n < need:
        raise SizeError(f"{j} derivatives need at least {need} nodes per direction, got {n}")


def hjsigma_norm(f: npt.ArrayLike, spec: WeightedNormSpec, r: npt.ArrayLike, grid: GridLike,
                 accuracy: int = DEFAULT_ACCURACY, mask: npt.ArrayLike | None = None) -> float:
    """sqrt(sum over |alpha| <= j of the integral of r^(2 sigma) |d^alpha f|^2)."""
    f = np.asarray(f, dtype=float)
    _check_support(f, spec.j, grid, accuracy)
    total = weighted_quadrature(f, r, spec.sigma, grid, mask)
    for k in range(1, spec.j + 1):
        for d in partial_derivatives(f, k, grid, accuracy):
            total += weighted_quadrature(d, r, spec.sigma, grid, mask)
    return float(np.sqrt(total))


def base_space_specs(kappa: float) -> tuple[WeightedNormSpec, WeightedNormSpec, WeightedNormSpec]:
    """Base space: L2(r^((1-k)/k)) x L2(r^(1/k)) x L2(r^(1/k)) as H^{0,sigma} specs."""
    return (WeightedNormSpec(0, (1 - kappa) / (2 * kappa)),
            WeightedNormSpec(0, 1 / (2 * kappa)),
            WeightedNormSpec(0, 1 / (2 * kappa)))


def high_order_specs(kappa: float, l: int) -> tuple[WeightedNormSpec, WeightedNormSpec, WeightedNormSpec]:
    """High-order space of order 2l."""
    s = 1 / (2 * kappa)
    return (WeightedNormSpec(2 * l, s + l - 0.5), WeightedNormSpec(2 * l, s + l), WeightedNormSpec(2 * l, s + l))


def _report(ls: "LinearizedState", specs, r: Array, grid: GridLike, accuracy: int) -> StateNormReport:
    rn = hjsigma_norm(ls.r_t, specs[0], r, grid, accuracy)
    un = hjsigma_norm(ls.u_t, specs[1], r, grid, accuracy)
    pn = hjsigma_norm(ls.pi_t, specs[2], r, grid, accuracy)
    return StateNormReport(rn, un, pn, float(np.sqrt(rn**2 + un**2 + pn**2)), specs)


def base_space_norm(ls: "LinearizedState", background: TransformedState, grid: GridLike,
                    c: ModelConstants) -> StateNormReport:
    """Component norms in the base space; the velocity norm sums all dim+1 components."""
    return _report(ls, base_space_specs(c.kappa), np.asarray(background.r, dtype=float), grid, DEFAULT_ACCURACY)


def high_order_norm(ls: "LinearizedState", l: int, background: TransformedState, grid: GridLike,
                    c: ModelConstants, accuracy: int = DEFAULT_ACCURACY) -> StateNormReport:
    if l < 0:
        raise WeightSpecError(f"order index l must be nonnegative, got {l}")
    return _report(ls, high_order_specs(c.kappa, l), np.asarray(background.r, dtype=float), grid, accuracy)


def energy_weights(background: TransformedState, c: ModelConstants) -> tuple[Array, Array, Array]:
    """Pointwise weights (w_r, w_u, w_pi) with E = 1/2 sum of integrals of w * field^2.

    The velocity weight multiplies the Minkowski square u_a u^a.
    """
    k = c.kappa
    r = np.asarray(background.r, dtype=float)
    pi = np.asarray(background.pi, dtype=float)
    if np.any(r <= 0):
        raise DegeneracyError("energy weights need r > 0 at every node")
    zeta = c.zeta(r ** (1 / k))
    if np.any(zeta <= 0):
        raise DegeneracyError("zeta vanishes on the interior")
    a1 = r + 1.0 + pi ** (2 + 1 / k) / r ** (1 / k)
    w_r = r ** (1 / k - 1)
    w_u = (k**2 / (k + 1)) * r ** (1 / k) * a1**2
    # r^(1/k-1) * r * (r pi^(1+1/k) a0^(1+1/k) a1 / zeta) simplifies to pi^(2+2/k) a1 / zeta
    w_pi = ((2 * k + 1) * k / (k + 1)) * pi ** (2 + 2 / k) * a1 / zeta
    return w_r, w_u, w_pi


def minkowski_square(v: Array) -> Array:
    return -v[0] ** 2 + np.sum(v[1:] ** 2, axis=0)


def energy_functional(ls: "LinearizedState", background: TransformedState, c: ModelConstants,
                      grid: GridLike) -> float:
    """The linearized energy E(t) evaluated by midpoint quadrature."""
    w_r, w_u, w_pi = energy_weights(background, c)
    dens = w_r * np.asarray(ls.r_t) ** 2 + w_u * minkowski_square(np.asarray(ls.u_t)) + w_pi * np.asarray(ls.pi_t) ** 2
    if not np.all(np.isfinite(dens)):
        raise PropagationError("non-finite energy density")
    return float(0.5 * grid.cell_volume * dens.sum())


def embedding_ratio(f: npt.ArrayLike, spec_hi: WeightedNormSpec, spec_lo: WeightedNormSpec,
                    r: npt.ArrayLike, grid: GridLike, accuracy: int = DEFAULT_ACCURACY) -> float:
    """||f||_{H^{j2,s2}} / ||f||_{H^{j1,s1}} for an admissible embedding pair."""
    j1, s1, j2, s2 = spec_hi.j, spec_hi.sigma, spec_lo.j, spec_lo.sigma
    if not j1 > j2:
        raise WeightSpecError("embedding needs j1 > j2")
    if not s1 > s2:
        raise WeightSpecError("embedding needs sigma1 > sigma2")
    if abs((j1 - j2) - (s1 - s2)) > 1e-12:
        raise WeightSpecError(f"embedding needs j1 - j2 = sigma1 - sigma2, got {j1 - j2} vs {s1 - s2}")
    hi = hjsigma_norm(f, spec_hi, r, grid, accuracy)
    if hi == 0:
        raise WeightSpecError("ratio undefined for a field with zero norm")
    return hjsigma_norm(f, spec_lo, r, grid, accuracy) / hi


def energy_equivalence_check(ensemble: Sequence["LinearizedState"], background: TransformedState,
                             c: ModelConstants, grid: GridLike) -> tuple[float, float]:
    """Empirical (min, max) of E / ||.||^2 over nonzero ensemble members."""
    ratios = []
    for ls in ensemble:
        h2 = base_space_norm(ls, background, grid, c).total ** 2
        if h2 == 0:
            continue
        ratios.append(energy_functional(ls, background, c, grid) / h2)
    if not ratios:
        raise WeightSpecError("ensemble contains no nonzero state")
    return float(min(ratios)), float(max(ratios))
