"""Instability-enhanced quantum sensing in a collective spin model with quartic twisting."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    DomainError,
    InvalidDimensionError,
    NumericalInvariantError,
    RegionError,
    SpinLyapError,
)
from .spin_core import ModelParams, build_hamiltonian, build_operators, coherent_state  # noqa: F401
