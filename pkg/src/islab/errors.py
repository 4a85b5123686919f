"""Exception types raised by islab."""


class IslabError(Exception):
    """Base class for all library errors."""


class DomainError(IslabError, ValueError):
    """An argument lies outside the admissible range of an operation."""


class DegeneracyError(IslabError, ValueError):
    """A coefficient or denominator vanishes (vacuum edge, zero enthalpy, ...)."""


class WeightSpecError(IslabError, ValueError):
    """A weighted-norm specification violates its invariants."""


class SizeError(IslabError, ValueError):
    """A field has too few nodes for the requested stencil."""


class PropagationError(IslabError, ValueError):
    """A non-finite value entered a computation that must stay finite."""


class DomainCollapseError(IslabError, RuntimeError):
    """The tracked vacuum edge reached the far boundary."""


class LinearSolveError(IslabError, RuntimeError):
    """A pointwise linear system was singular or numerically unsolvable."""


class ConvergenceError(IslabError, RuntimeError):
    """An iterative method hit its iteration cap."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class NumericalAbort(IslabError, RuntimeError):
    """Time stepping produced non-finite values."""

    def __init__(self, message: str, step: int, t: float):
        super().__init__(f"{message} at step {step}, t={t:.6g}")
        self.step = step
        self.t = t


class ConfigError(IslabError, ValueError):
    """A run configuration could not be parsed or validated."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
