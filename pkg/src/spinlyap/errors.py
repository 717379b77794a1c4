"""Exception hierarchy shared by the library and the CLI."""


class SpinLyapError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(SpinLyapError, ValueError):
    """Hilbert-space dimension is invalid or inconsistent."""


class DomainError(SpinLyapError, ValueError):
    """Input lies outside the domain of an operation (e.g. outside the disk)."""


class RegionError(SpinLyapError, ValueError):
    """Operation requires a hyperbolic fixed point but none exists."""


class ConfigError(SpinLyapError, ValueError):
    """Invalid run configuration."""


class NumericalInvariantError(SpinLyapError, RuntimeError):
    """A numerical self-check failed."""
