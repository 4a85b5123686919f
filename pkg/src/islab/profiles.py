"""Background and test-field families shared by the experiments.

Vacuum profiles have ``r`` and ``pi`` vanishing linearly at the left edge and
flattening toward the far edge, so far-edge pinning perturbs little.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import numpy.typing as npt

from .grid import MovingGrid
from .nonlinear import FieldState, ManufacturedBackground

Array = npt.NDArray[np.float64]


CUTOFF_POWER = 6


def flat_weight(s: Array) -> Array:
    """(1 - s^2)^6 on [0, 1) and 0 beyond; C^5 at s = 1."""
    s = np.abs(s)
    return np.where(s < 1.0, (1.0 - np.minimum(s, 1.0) ** 2) ** CUTOFF_POWER, 0.0)


_RAMP = np.polynomial.Polynomial([1.0, 0.0, -1.0]) ** CUTOFF_POWER
_RAMP_INT = _RAMP.integ()


def flat_ramp(s: Array) -> Array:
    """Integral of ``flat_weight`` from 0: slope 1 at s = 0, exactly constant for s >= 1."""
    return _RAMP_INT(np.clip(s, 0.0, 1.0))


@dataclass(frozen=True)
class VacuumProfile:
    """Vacuum background with a flat far field.

    With d the distance to the edge and w(d) = flat_weight(d / length):
    r = slope * length * flat_ramp(d / length) * (1 + bump sin(bump_freq d) w),
    a0 = a0_mean * exp(a0_amp sin(a0_freq d) w), pi = a0 r and
    u^1 = (pulse + u_tilt sin(pi d)) w + u_shift.  Everything is constant
    beyond d = length, so r and pi vanish linearly at the edge and the far
    region is spatially homogeneous.
    """

    slope: float = 0.25
    length: float = 0.6
    bump: float = 0.0
    bump_freq: float = 2.0
    a0_mean: float = 1.0
    a0_amp: float = 0.0
    a0_freq: float = 3.0
    u_amp: float = 0.0
    u_center: float = 0.3
    u_width: float = 0.12
    u_shift: float = 0.0
    u_tilt: float = 0.0

    def weight(self, d: Array) -> Array:
        return flat_weight(d / self.length)

    def r(self, d: Array) -> Array:
        w = self.weight(d)
        return self.slope * self.length * flat_ramp(d / self.length) * (1.0 + self.bump * np.sin(self.bump_freq * d) * w)

    def a0(self, d: Array) -> Array:
        return self.a0_mean * np.exp(self.a0_amp * np.sin(self.a0_freq * d) * self.weight(d))

    def pi(self, d: Array) -> Array:
        return self.a0(d) * self.r(d)

    def velocity(self, d: Array) -> Array:
        pulse = self.u_amp * np.exp(-(((d - self.u_center) / self.u_width) ** 2))
        return (pulse + self.u_tilt * np.sin(np.pi * d)) * self.weight(d) + self.u_shift

    def state(self, grid: MovingGrid, t: float = 0.0) -> FieldState:
        d = grid.nodes - grid.b
        return FieldState.from_spatial(grid, self.r(d), self.velocity(d)[None], self.pi(d), t)

    def background(self, b: float = 0.0) -> ManufacturedBackground:
        return ManufacturedBackground(r=lambda t, x: self.r(x - b),
                                      u_spatial=lambda t, x: self.velocity(x - b)[None],
                                      pi=lambda t, x: self.pi(x - b), static=True)


def random_profile(rng: np.random.Generator, u_scale: float = 0.05) -> VacuumProfile:
    """Random vacuum profile with a0 in [1/2, 2] and a small velocity pulse."""
    return VacuumProfile(slope=rng.uniform(0.15, 0.3), length=rng.uniform(0.4, 0.7),
                         bump=rng.uniform(-0.2, 0.2), bump_freq=rng.uniform(1.0, 3.0),
                         a0_mean=float(np.exp(rng.uniform(-0.3, 0.3))), a0_amp=rng.uniform(0.0, 0.35),
                         a0_freq=rng.uniform(1.0, 4.0), u_amp=rng.uniform(-u_scale, u_scale),
                         u_center=rng.uniform(0.15, 0.4), u_width=rng.uniform(0.08, 0.15))


def smooth_cutoff(x: Array, start: float, stop: float) -> Array:
    """C-infinity step equal to 1 for x <= start and 0 for x >= stop."""
    s = np.clip((x - start) / (stop - start), 0.0, 1.0)
    f = lambda z: np.where(z > 0, np.exp(-1.0 / np.maximum(z, 1e-300)), 0.0)
    return f(1 - s) / (f(1 - s) + f(s))


def random_smooth_field(rng: np.random.Generator, x: Array, modes: int = 4, cutoff: tuple[float, float] | None = None,
                        lo: float = 0.0, hi: float = 1.0) -> Array:
    """Random trigonometric polynomial on [lo, hi], optionally multiplied by a far-edge cutoff."""
    s = (x - lo) / (hi - lo)
    f = np.zeros_like(x)
    for k in range(modes):
        f += rng.normal() / (1 + k) * np.cos(np.pi * k * s + rng.uniform(0, 2 * np.pi))
    if cutoff is not None:
        f *= smooth_cutoff(s, *cutoff)
    return f


SampleFn = Callable[[Array], Array]
