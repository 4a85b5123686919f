"""Gronwall-type bound, bookkeeping order calculus and small shared verification helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Literal, Sequence

import numpy as np
import numpy.typing as npt
from scipy.integrate import cumulative_simpson, simpson, solve_ivp

from .errors import DomainError

Array = npt.NDArray[np.float64]
Fn = Callable[[Array], Array]

QUAD_INTERVALS = 2048


# ---------------------------------------------------------------- Gronwall

def _as_function(f: Fn | float | npt.ArrayLike, T: float) -> Fn:
    if callable(f):
        return lambda t: np.broadcast_to(np.asarray(f(np.asarray(t, dtype=float)), dtype=float), np.shape(t))
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return lambda t: np.full(np.shape(t), float(arr))
    grid = np.linspace(0.0, T, arr.size)
    return lambda t: np.interp(t, grid, arr)


@dataclass(frozen=True)
class GronwallInput:
    """d(t) <= c(t) + int_0^t a d + b d^alpha ds with a, b, c >= 0 and 0 < alpha < 1.

    ``a``, ``b`` and ``c`` may be callables, constants or samples on a uniform
    grid of [0, T].  The closed form is a valid bound when c is nondecreasing.
    """

    a: Fn | float | npt.ArrayLike
    b: Fn | float | npt.ArrayLike
    c: Fn | float | npt.ArrayLike
    alpha: float
    T: float

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")

    def functions(self) -> tuple[Fn, Fn, Fn]:
        return _as_function(self.a, self.T), _as_function(self.b, self.T), _as_function(self.c, self.T)


def gronwall_bound(inp: GronwallInput, t: float | npt.ArrayLike, intervals: int = QUAD_INTERVALS) -> float | Array:
    """(c^(1-a) e^((1-a) int_0^t a) + (1-a) int_0^t b(s) e^((1-a) int_s^t a) ds)^(1/(1-a)).

    Integrals use composite Simpson on ``intervals`` equal parts of [0, t]."""
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0) or np.any(ts > inp.T * (1 + 1e-12)):
        raise DomainError("t must lie in [0, T]")
    a, b, c = inp.functions()
    p = 1.0 - inp.alpha
    out = np.empty(ts.shape)
    for idx, tv in np.ndenumerate(ts):
        if tv == 0:
            out[idx] = float(c(np.array(0.0)))
            continue
        s = np.linspace(0.0, tv, intervals + 1)
        A = cumulative_simpson(a(s), x=s, initial=0.0)
        inner = simpson(b(s) * np.exp(p * (A[-1] - A)), x=s)
        cv = float(c(np.array(tv)))
        out[idx] = (cv**p * np.exp(p * A[-1]) + p * inner) ** (1.0 / p)
    return float(out) if out.ndim == 0 else out


def equality_solution(inp: GronwallInput, t_eval: Array, rtol: float = 1e-12, atol: float = 1e-14,
                      deficit: Fn | None = None) -> Array:
    """d' = a d + b d^alpha (- deficit) with d(0) = c(0): equality case for constant c."""
    a, b, c = inp.functions()
    e = deficit if deficit is not None else (lambda t: 0.0)

    def rhs(t, y):
        d = max(y[0], 0.0)
        return [float(a(np.array(t))) * d + float(b(np.array(t))) * d**inp.alpha - float(e(t))]

    sol = solve_ivp(rhs, (0.0, float(t_eval[-1])), [float(c(np.array(0.0)))], method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:  # pragma: no cover - DOP853 on smooth scalar ODEs
        raise DomainError(f"ODE integration failed: {sol.message}")
    return sol.y[0]


@dataclass
class GronwallReport:
    trials: int
    max_saturation_gap: float
    max_violation: float
    sub_solution_ok: bool
    passed: bool
    worst: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"trials": self.trials, "max_saturation_gap": self.max_saturation_gap,
                "max_violation": self.max_violation, "sub_solution_ok": self.sub_solution_ok, "passed": self.passed}


def random_gronwall_input(rng: np.random.Generator, alpha_range: tuple[float, float] = (0.1, 0.9),
                          T: float = 1.0) -> GronwallInput:
    """Smooth nonnegative a, b (squared trigonometric sums) and a constant c."""
    def smooth(scale: float) -> Fn:
        amp = rng.uniform(0, scale, 3)
        freq = rng.uniform(0.5, 4.0, 3)
        ph = rng.uniform(0, 2 * np.pi, 3)
        base = rng.uniform(0, scale)
        return lambda t: base + sum(A * np.sin(w * np.asarray(t) + p) ** 2 for A, w, p in zip(amp, freq, ph))
    return GronwallInput(smooth(1.0), smooth(1.0), float(rng.uniform(0.1, 2.0)), float(rng.uniform(*alpha_range)), T)


def gronwall_verify(trials: int = 100, seed: int = 0, alpha_range: tuple[float, float] = (0.1, 0.9),
                    tol: float = 1e-6, samples: int = 33, instances: Sequence[GronwallInput] | None = None) -> GronwallReport:
    """Check d <= bound (1 + tol) and saturation |d / bound - 1| <= tol for the equality ODE.

    A strictly smaller solution (with a positive deficit term) must stay
    below the bound as well."""
    rng = np.random.Generator(np.random.Philox(seed))
    cases = list(instances) if instances is not None else [random_gronwall_input(rng, alpha_range) for _ in range(trials)]
    gap = viol = 0.0
    sub_ok = True
    worst: dict = {}
    for i, inp in enumerate(cases):
        t = np.linspace(0.0, inp.T, samples)
        d = equality_solution(inp, t)
        bound = np.asarray(gronwall_bound(inp, t))
        rel = d / bound - 1.0
        g = float(np.max(np.abs(rel)))
        if g > gap:
            gap = g
            worst = {"index": i, "alpha": inp.alpha, "gap": g}
        viol = max(viol, float(np.max(rel)))
        below = equality_solution(inp, t, deficit=lambda s: 0.05 * d[0])
        sub_ok &= bool(np.all(below <= bound * (1 + tol)))
    return GronwallReport(len(cases), gap, viol, sub_ok, gap <= tol and viol <= tol and sub_ok, worst)


# ---------------------------------------------------------------- bookkeeping orders

Variable = Literal["r", "u", "pi"]
_HALF = Fraction(1, 2)


@dataclass(frozen=True)
class TermDescriptor:
    """r^a d^b X with ``dt_count`` material derivatives applied, X one of r~, u~, pi~."""

    variable: Variable
    a: int = 0
    b: int = 0
    dt_count: int = 0

    def __post_init__(self) -> None:
        if self.variable not in ("r", "u", "pi"):
            raise DomainError(f"variable must be 'r', 'u' or 'pi', got {self.variable!r}")
        for name in ("a", "b", "dt_count"):
            if int(getattr(self, name)) != getattr(self, name):
                raise DomainError(f"{name} must be an integer")

    def d(self, times: int = 1) -> "TermDescriptor":
        return TermDescriptor(self.variable, self.a, self.b + times, self.dt_count)

    def times_r(self, power: int = 1) -> "TermDescriptor":
        return TermDescriptor(self.variable, self.a + power, self.b, self.dt_count)

    def material(self, times: int = 1) -> "TermDescriptor":
        return TermDescriptor(self.variable, self.a, self.b, self.dt_count + times)


def term_order(t: TermDescriptor) -> Fraction:
    """b - a, plus 1/2 for u~ and pi~, plus 1/2 per material derivative."""
    base = Fraction(t.b - t.a)
    if t.variable in ("u", "pi"):
        base += _HALF
    return base + _HALF * t.dt_count


def product_order(terms: Iterable[TermDescriptor]) -> Fraction:
    """Order of a product of terms: orders add."""
    return sum((term_order(t) for t in terms), Fraction(0))


def order_balance_check(lhs: TermDescriptor | Fraction, rhs: Sequence[TermDescriptor]) -> bool:
    """True iff no right-hand term exceeds the left-hand order."""
    target = lhs if isinstance(lhs, Fraction) else term_order(lhs)
    return all(term_order(t) <= target for t in rhs)


def display_order(rhs: Sequence[TermDescriptor]) -> Fraction:
    """Order of an expression: that of its leading term."""
    if not rhs:
        raise DomainError("empty expression")
    return max(term_order(t) for t in rhs)


# The material derivatives of the perturbation and their leading terms.
BOOKKEEPING_DISPLAYS: dict[str, tuple[TermDescriptor, ...]] = {
    "D_t r": (TermDescriptor("u", a=1, b=1), TermDescriptor("u")),
    "D_t u": (TermDescriptor("r", b=1),),
    "D_t pi": (TermDescriptor("u", a=1, b=1), TermDescriptor("u")),
}


def material_derivative_orders() -> dict[str, Fraction]:
    """Orders of D_t r~, D_t u~, D_t pi~ read off their leading terms."""
    return {k: display_order(v) for k, v in BOOKKEEPING_DISPLAYS.items()}


# ---------------------------------------------------------------- small helpers

def loglog_slope(x: npt.ArrayLike, y: npt.ArrayLike) -> float:
    """Least-squares slope of log y against log x."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def convergence_order(errors: Sequence[float], factor: float = 2.0) -> list[float]:
    """Observed orders log(e_k / e_(k+1)) / log(factor)."""
    e = np.asarray(errors, dtype=float)
    return [float(np.log(e[i] / e[i + 1]) / np.log(factor)) for i in range(e.size - 1)]
