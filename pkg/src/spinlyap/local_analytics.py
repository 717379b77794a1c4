"""Short-time theory near a hyperbolic point.

Around ``(Q_hyp, 0)`` the mean-field energy is expanded as::

    H = H0 + mu dQ^2 + nu dP^2 + gamma dQ^3 + eta dQ dP^2 + O(d^4)

The quadratic part generates the linear flow ``A = [[0, 2 nu], [-2 mu, 0]]``
with ``lambda = 2 sqrt(-mu nu)``; an initially isotropic covariance is
propagated as ``M Gamma M^T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classical_phase import FixedPoint, hamiltonian_qp, hyperbolic_point
from .errors import RegionError
from .spin_core import ModelParams

__all__ = [
    "LocalExpansion",
    "CovarianceFlow",
    "BosonicCoefficients",
    "local_expansion",
    "local_expansion_at_hyperbolic",
    "flow_matrix",
    "covariance_flow",
    "mmt_closed_form",
    "analytic_antisqueezing",
    "ln_analytic_antisqueezing",
    "optimal_angle_flow",
    "angle_from_disk_direction",
    "bosonic_coefficients",
]


@dataclass(frozen=True)
class LocalExpansion:
    Q_hyp: float
    H0: float
    mu: float
    nu: float
    gamma: float
    eta: float

    @property
    def kappa(self) -> float:
        return abs(self.nu - self.mu)

    @property
    def lam(self) -> float:
        prod = -self.mu * self.nu
        return 2.0 * math.sqrt(prod) if prod > 0 else 0.0

    @property
    def is_hyperbolic(self) -> bool:
        return self.mu < 0 < self.nu


def local_expansion(params: ModelParams, fp: FixedPoint) -> LocalExpansion:
    """Taylor coefficients of the mean-field energy at a hyperbolic fixed point."""
    if not fp.is_hyperbolic:
        raise RegionError(f"fixed point at Q={fp.Q} is not hyperbolic")
    h, J, K = params.h, params.J, params.K
    Q = fp.Q
    x = Q * Q
    mu = h - 2 * J + 3 * J * x - 12 * K * x + 15 * K * x**2 - 3.5 * K * x**3
    nu = h + 0.5 * J * x + K * x**2 - 0.25 * K * x**3
    gamma = Q * (2 * J - 8 * K + 20 * K * x - 7 * K * x**2)
    eta = Q * (J + 4 * K * x - 1.5 * K * x**2)
    H0 = float(hamiltonian_qp(Q, 0.0, params))
    return LocalExpansion(Q, H0, mu, nu, gamma, eta)


def local_expansion_at_hyperbolic(params: ModelParams) -> LocalExpansion:
    return local_expansion(params, hyperbolic_point(params))


def flow_matrix(exp: LocalExpansion) -> np.ndarray:
    return np.array([[0.0, 2.0 * exp.nu], [-2.0 * exp.mu, 0.0]])


@dataclass(frozen=True, eq=False)
class CovarianceFlow:
    t: float
    M: np.ndarray
    gamma_c: np.ndarray
    degenerate: bool  # lambda == 0: M = 1 + A t

    @property
    def tau_c(self) -> float:
        return float(np.linalg.eigvalsh(self.gamma_c)[-1])


def covariance_flow(exp: LocalExpansion, t: float, gamma0: np.ndarray | None = None) -> CovarianceFlow:
    """``M(t) = cosh(lt) 1 + sinh(lt)/l A`` and ``Gamma_C(t) = M Gamma0 M^T`` (``Gamma0 = 1`` by default)."""
    A = flow_matrix(exp)
    lam = exp.lam
    if lam > 0:
        M = math.cosh(lam * t) * np.eye(2) + (math.sinh(lam * t) / lam) * A
        degenerate = False
    else:
        M = np.eye(2) + A * t
        degenerate = True
    g0 = np.eye(2) if gamma0 is None else np.asarray(gamma0, float)
    return CovarianceFlow(t, M, M @ g0 @ M.T, degenerate)


def mmt_closed_form(exp: LocalExpansion, t: float) -> np.ndarray:
    lam = exp.lam
    mu, nu = exp.mu, exp.nu
    ch2 = math.cosh(lam * t) ** 2
    sh2 = math.sinh(lam * t) ** 2
    off = (nu - mu) / lam * math.sinh(2 * lam * t)
    return np.array(
        [
            [ch2 + 4 * nu**2 / lam**2 * sh2, off],
            [off, ch2 + 4 * mu**2 / lam**2 * sh2],
        ]
    )


def _rho(exp: LocalExpansion, t):
    t = np.asarray(t, float)
    lam = exp.lam
    if lam > 0:
        return (exp.kappa / lam * np.sinh(lam * t)) ** 2
    return (exp.kappa * t) ** 2


def analytic_antisqueezing(exp: LocalExpansion, t):
    """``xi_C^2 = (sqrt(1 + rho) + sqrt(rho))^2`` with ``rho = (kappa/lambda)^2 sinh^2(lambda t)``.

    At ``lambda = 0`` the limit ``rho = kappa^2 t^2`` is used.
    """
    rho = _rho(exp, t)
    value = (np.sqrt(1.0 + rho) + np.sqrt(rho)) ** 2
    return float(value) if np.ndim(value) == 0 else value


def ln_analytic_antisqueezing(exp: LocalExpansion, t):
    """``ln xi_C^2 = 2 asinh((kappa/lambda) sinh(lambda t))``."""
    value = 2.0 * np.arcsinh(np.sqrt(_rho(exp, t)) * np.sign(np.asarray(t, float)))
    return float(value) if np.ndim(value) == 0 else value


def angle_from_disk_direction(vQ, vP):
    """Transverse angle ``alpha`` in ``[0, pi)`` for a direction in the ``(dQ, dP)`` plane.

    The basis vector ``e1 = y`` maps onto ``-dP`` and ``e2`` onto ``-dQ``, so
    ``(dQ, dP) ~ (sin(alpha), cos(alpha))``.
    """
    return np.mod(np.arctan2(vQ, vP), np.pi)


def optimal_angle_flow(exp: LocalExpansion, t_grid) -> np.ndarray:
    """Angle of the leading eigenvector of ``M M^T`` per time; NaN where the eigenvalues coincide.

    The branch is chosen by continuity in ``t`` so the curve does not jump by ``pi``.
    """
    t_grid = np.asarray(t_grid, float)
    out = np.full(t_grid.shape, np.nan)
    prev = None
    for idx, t in enumerate(t_grid):
        mmt = covariance_flow(exp, float(t)).gamma_c
        a, b, d = mmt[0, 0], mmt[0, 1], mmt[1, 1]
        if math.hypot(a - d, 2 * b) <= 1e-14 * (a + d):
            continue
        # leading eigenvector angle in the (Q, P) plane: tan(2 psi) = 2b / (a - d)
        psi = 0.5 * math.atan2(2 * b, a - d)
        alpha = float(angle_from_disk_direction(math.cos(psi), math.sin(psi)))
        if prev is not None:
            alpha += np.pi * round((prev - alpha) / np.pi)
        out[idx] = alpha
        prev = alpha
    return out


@dataclass(frozen=True)
class BosonicCoefficients:
    """Coefficients of the quantized local Hamiltonian in ``a, a^dagger``.

    ``H = constant + squeezing (a^2 + a^+2) + number n
    + cubic_a3 (a^+3 + a^3) + cubic_mixed (a^+2 a + a^+ a^2 + a^+ + a)``
    """

    squeezing: float
    number: float
    constant: float
    cubic_a3: float
    cubic_mixed: float


def bosonic_coefficients(exp: LocalExpansion) -> BosonicCoefficients:
    r2 = 2.0 * math.sqrt(2.0)
    return BosonicCoefficients(
        squeezing=(exp.mu - exp.nu) / 2.0,
        number=exp.mu + exp.nu,
        constant=(exp.mu + exp.nu) / 2.0 + exp.H0,
        cubic_a3=(exp.gamma - exp.eta) / r2,
        cubic_mixed=(3.0 * exp.gamma + exp.eta) / r2,
    )
