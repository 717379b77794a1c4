"""Collective spin operators, the model Hamiltonian and spin coherent states.

All matrices use the Dicke basis of maximal total spin ``S = N/2`` ordered by
ascending ``m = -S, ..., +S``; index ``i`` corresponds to ``m = i - S``.
States are plain complex numpy vectors of length ``N + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from .config import DEFAULT_TOLERANCES
from .errors import DomainError, InvalidDimensionError

__all__ = [
    "ModelParams",
    "SpinOperatorSet",
    "build_operators",
    "build_hamiltonian",
    "hamiltonian_banded",
    "coherent_state",
    "coherent_amplitudes",
    "expectation",
    "variance",
    "covariance",
    "spin_alpha_operator",
    "transverse_operators",
]


@dataclass(frozen=True)
class ModelParams:
    """Couplings of ``H = 2h Sz - (2J/S) Sx^2 - (2K/S^3) Sx^4`` and the particle number.

    The derived rates (``omega``, ``chi2``, ``chi4``) are always recomputed
    from ``(h, J, K, N)``.
    """

    h: float
    J: float
    K: float = 0.0
    N: int = 500

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise InvalidDimensionError(f"N must be an integer, got {self.N!r}")
        if self.N < 1:
            raise InvalidDimensionError(f"N must be >= 1, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("h", "J", "K"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.K < 0:
            raise DomainError(f"K must be >= 0, got {self.K}")

    @property
    def S(self) -> float:
        return self.N / 2

    @property
    def dim(self) -> int:
        return self.N + 1

    @property
    def omega(self) -> float:
        return 2.0 * self.h

    @property
    def chi2(self) -> float:
        return 2.0 * self.J / self.S

    @property
    def chi4(self) -> float:
        return 2.0 * self.K / self.S**3

    def _require_J(self):
        if self.J <= 0:
            raise DomainError(f"ratios to J need J > 0, got J={self.J}")

    @property
    def h_over_J(self) -> float:
        self._require_J()
        return self.h / self.J

    @property
    def K_over_J(self) -> float:
        self._require_J()
        return self.K / self.J

    def with_(self, **changes) -> "ModelParams":
        values = {"h": self.h, "J": self.J, "K": self.K, "N": self.N}
        values.update(changes)
        return ModelParams(**values)

    def to_dict(self) -> dict:
        return {"h": self.h, "J": self.J, "K": self.K, "N": self.N}


@dataclass(frozen=True, eq=False)
class SpinOperatorSet:
    """Dense collective spin matrices for one value of ``N`` (read-only arrays)."""

    N: int
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    @property
    def S(self) -> float:
        return self.N / 2

    @property
    def dim(self) -> int:
        return self.N + 1

    @property
    def m(self) -> np.ndarray:
        return np.diag(self.sz)


def _as_dimension(N_or_params) -> int:
    N = N_or_params.N if isinstance(N_or_params, ModelParams) else N_or_params
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise InvalidDimensionError(f"N must be a positive integer, got {N!r}")
    return int(N)


def _ladder_elements(N: int) -> np.ndarray:
    # <m+1|S+|m> for m = -S .. S-1
    S = N / 2
    m = np.arange(N) - S
    return np.sqrt(S * (S + 1) - m * (m + 1))


@lru_cache(maxsize=16)
def _operators(N: int) -> SpinOperatorSet:
    S = N / 2
    c = _ladder_elements(N)
    splus = np.diag(c, -1)
    sx = 0.5 * (splus + splus.T)
    sy = -0.5j * (splus - splus.T)
    sz = np.diag(np.arange(N + 1) - S).astype(float)
    for a in (sx, sy, sz):
        a.setflags(write=False)
    return SpinOperatorSet(N=N, sx=sx, sy=sy, sz=sz)


def build_operators(N_or_params) -> SpinOperatorSet:
    """Return ``Sx, Sy, Sz`` for ``N`` spin-1/2 particles (accepts ``N`` or ``ModelParams``)."""
    return _operators(_as_dimension(N_or_params))


def _sparse_sx(N: int) -> sp.csr_matrix:
    c = _ladder_elements(N) / 2
    return sp.diags([c, c], [-1, 1], shape=(N + 1, N + 1), format="csr")


def build_hamiltonian(params: ModelParams, ops: SpinOperatorSet | None = None) -> np.ndarray:
    """Dense real symmetric ``Omega Sz - chi2 Sx^2 - chi4 Sx^4`` (bandwidth 4)."""
    if ops is not None and ops.N != params.N:
        raise InvalidDimensionError(f"operators built for N={ops.N}, params have N={params.N}")
    N = params.N
    sx = _sparse_sx(N)
    sx2 = sx @ sx
    sx4 = sx2 @ sx2
    m = np.arange(N + 1) - N / 2
    H = params.omega * sp.diags(m) - params.chi2 * sx2 - params.chi4 * sx4
    H = H.toarray()
    return 0.5 * (H + H.T)


def hamiltonian_banded(params: ModelParams) -> np.ndarray:
    """Upper banded storage (``scipy.linalg.eig_banded`` layout) with 4 super-diagonals."""
    H = build_hamiltonian(params)
    dim = H.shape[0]
    band = np.zeros((5, dim))
    for k in range(5):
        band[4 - k, k:] = np.diagonal(H, k)
    return band


def coherent_amplitudes(theta: float, phi: float, N: int) -> np.ndarray:
    """Spin coherent state ``|theta, phi>`` in the ascending-m Dicke basis.

    Amplitudes are ``sqrt(C(N, S+m)) cos(theta/2)^(S+m) sin(theta/2)^(S-m)
    exp(i (S-m) phi)``, evaluated in log space. The poles are set directly.
    """
    N = _as_dimension(N)
    if not (0.0 <= theta <= math.pi):
        raise DomainError(f"theta must lie in [0, pi], got {theta}")
    amp = np.zeros(N + 1, dtype=complex)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if s == 0.0:  # includes subnormal theta
        amp[N] = 1.0
        return amp
    if c == 0.0 or theta == math.pi:
        amp[0] = 1.0
        return amp
    n_up = np.arange(N + 1)
    n_down = N - n_up
    log_binom = 0.5 * (gammaln(N + 1) - gammaln(n_up + 1) - gammaln(n_down + 1))
    log_mod = log_binom + n_up * math.log(c) + n_down * math.log(s)
    amp = np.exp(log_mod) * np.exp(1j * n_down * phi)
    return amp / np.linalg.norm(amp)


def coherent_state(theta: float, phi: float, N: int) -> np.ndarray:
    return coherent_amplitudes(theta, phi, N)


def _check_hermitian(op: np.ndarray, rtol: float = 1e-10):
    scale = max(1.0, float(np.max(np.abs(op)))) if op.size else 1.0
    if np.max(np.abs(op - op.conj().T)) > rtol * scale:
        raise DomainError("operator is not Hermitian")


def expectation(state: np.ndarray, op: np.ndarray, check: bool = True) -> float:
    """``<psi|A|psi>`` for Hermitian ``A``; the imaginary residue must vanish."""
    if op.shape != (state.size, state.size):
        raise InvalidDimensionError(f"operator shape {op.shape} does not match state of size {state.size}")
    if check:
        _check_hermitian(op)
    value = np.vdot(state, op @ state)
    if abs(value.imag) > DEFAULT_TOLERANCES.norm * max(1.0, abs(value.real)):
        raise DomainError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def variance(state: np.ndarray, op: np.ndarray, check: bool = True) -> float:
    """``<A^2> - <A>^2``, computed as ``||A psi||^2 - <A>^2``."""
    if op.shape != (state.size, state.size):
        raise InvalidDimensionError(f"operator shape {op.shape} does not match state of size {state.size}")
    if check:
        _check_hermitian(op)
    a_psi = op @ state
    mean = np.vdot(state, a_psi).real
    return float(np.vdot(a_psi, a_psi).real - mean**2)


def covariance(state: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Symmetrized covariance ``<{A,B}>/2 - <A><B>`` of two Hermitian operators."""
    a_psi = a @ state
    b_psi = b @ state
    sym = np.vdot(a_psi, b_psi).real  # Re<A B> = <{A,B}>/2
    return float(sym - np.vdot(state, a_psi).real * np.vdot(state, b_psi).real)


def transverse_operators(theta_hyp: float, ops: SpinOperatorSet) -> tuple[np.ndarray, np.ndarray]:
    """``(S_e1, S_e2)`` with ``e1 = y`` and ``e2 = (cos t, 0, -sin t)``, both orthogonal to ``(sin t, 0, cos t)``."""
    e1 = ops.sy
    e2 = math.cos(theta_hyp) * ops.sx - math.sin(theta_hyp) * ops.sz
    return e1, e2


def spin_alpha_operator(alpha: float, theta_hyp: float, ops: SpinOperatorSet) -> np.ndarray:
    """``S_alpha = Sy cos(alpha) + (cos(t) Sx - sin(t) Sz) sin(alpha)``."""
    e1, e2 = transverse_operators(theta_hyp, ops)
    return math.cos(alpha) * e1 + math.sin(alpha) * e2
