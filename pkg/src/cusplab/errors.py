"""Exception types shared across the package."""


class CuspLabError(Exception):
    """Base class for all package errors."""


class DomainError(CuspLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InvalidProfileError(CuspLabError, ValueError):
    """A profile specification violates its structural requirements."""


class DegeneratePointError(CuspLabError, ValueError):
    """A direction-valued quantity was requested at a point where it is undefined."""


class EvaluationError(CuspLabError, ArithmeticError):
    """An integrand or field produced a non-finite sample."""


class MeshingError(CuspLabError, RuntimeError):
    """Mesh generation could not satisfy its construction invariants."""


class AssemblyError(CuspLabError, RuntimeError):
    """The assembled linear system is singular, indefinite or inconsistent."""


class InsufficientDataError(CuspLabError, ValueError):
    """Not enough usable samples/rings to perform the requested estimate."""


class UnsupportedDimensionError(CuspLabError, ValueError):
    """The operation is not implemented for the requested space dimension."""


class ConfigError(CuspLabError, ValueError):
    """An experiment configuration failed validation."""
