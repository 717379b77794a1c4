"""Exact quantum dynamics in the symmetric Dicke sector.

Time evolution is spectral: ``H`` is diagonalized once per parameter set
and cached. The echo protocol applies forward evolution, a small rotation
``exp(-i dphi S_alpha)`` and backward evolution, and the metrological gain
is measured by the anti-squeezing ``xi_+^2`` (maximal transverse variance
relative to the coherent-state value ``S/2``).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq, minimize_scalar

from . import kernels
from .classical_phase import (
    disk_to_bloch,
    hamiltonian_gradient,
    hamiltonian_qp,
    hyperbolic_point,
    local_lyapunov,
)
from .errors import DomainError, InvalidDimensionError, RegionError
from .spin_core import (
    ModelParams,
    build_hamiltonian,
    build_operators,
    coherent_state,
    covariance,
    hamiltonian_banded,
    spin_alpha_operator,
    transverse_operators,
    variance,
)

__all__ = [
    "Propagator",
    "EchoResult",
    "GainCurve",
    "GrowthFit",
    "InitialCondition",
    "MatchedPair",
    "HusimiField",
    "build_propagator",
    "clear_propagator_cache",
    "evolve",
    "hyperbolic_initial_state",
    "echo_protocol",
    "echo_scan",
    "readout_gain",
    "qfi",
    "transverse_covariance",
    "anti_squeezing",
    "gain_curve",
    "fit_growth_rate",
    "infidelity_curve",
    "lmg_field_for_lambda",
    "matched_lambda_comparison",
    "husimi",
    "husimi_disk",
    "husimi_sphere_norm",
    "separatrix",
    "energy_expectation",
]


@dataclass(frozen=True, eq=False)
class Propagator:
    params: ModelParams
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.energies.size

    def evolve(self, state: np.ndarray, t: float) -> np.ndarray:
        return evolve(state, self, t)


def _diagonalize(params: ModelParams, method: str) -> Propagator:
    if method == "dense":
        E, V = la.eigh(build_hamiltonian(params))
    elif method == "banded":
        E, V = la.eig_banded(hamiltonian_banded(params), lower=False)
    else:
        raise ValueError(f"unknown diagonalization method {method!r}")
    E.setflags(write=False)
    V.setflags(write=False)
    return Propagator(params, E, V)


_CACHE: dict[tuple[ModelParams, str], Propagator] = {}
_CACHE_LOCK = threading.Lock()
_CACHE_SIZE = 32


def build_propagator(params: ModelParams, method: str = "dense", cache: bool = True) -> Propagator:
    """Eigendecomposition of the model Hamiltonian, cached per ``(params, method)``.

    Cached propagators are read-only and may be shared between threads; the
    cache itself is guarded by a lock so concurrent sweeps diagonalize each
    parameter set once.
    """
    if not cache:
        return _diagonalize(params, method)
    key = (params, method)
    with _CACHE_LOCK:
        prop = _CACHE.get(key)
        if prop is None:
            prop = _diagonalize(params, method)
            if len(_CACHE) >= _CACHE_SIZE:
                _CACHE.pop(next(iter(_CACHE)))
            _CACHE[key] = prop
    return prop


def clear_propagator_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()


def evolve(state: np.ndarray, prop: Propagator, t: float) -> np.ndarray:
    """``exp(-i H t) |psi>`` through the eigenbasis."""
    state = np.asarray(state)
    if state.shape != (prop.dim,):
        raise InvalidDimensionError(f"state of shape {state.shape} does not match dimension {prop.dim}")
    if t == 0:
        return state.astype(complex, copy=True)
    coeffs = prop.vectors.T @ state
    return prop.vectors @ (np.exp(-1j * prop.energies * t) * coeffs)


@dataclass(frozen=True, eq=False)
class InitialCondition:
    state: np.ndarray
    theta_hyp: float
    Q_hyp: float


def hyperbolic_initial_state(params: ModelParams) -> InitialCondition:
    """Coherent state centred on the hyperbolic point with the largest ``Q`` (``phi = 0``).

    In the double-well region this is the south pole.
    """
    fp = hyperbolic_point(params)
    theta = math.pi if fp.Q == 0.0 else fp.bloch_theta
    return InitialCondition(coherent_state(theta, 0.0, params.N), theta, fp.Q)


@lru_cache(maxsize=64)
def _rotation_eig(N: int, alpha: float, theta_hyp: float):
    gen = spin_alpha_operator(alpha, theta_hyp, build_operators(N))
    w, U = la.eigh(gen)
    return w, U


def _rotate(state: np.ndarray, N: int, alpha: float, theta_hyp: float, delta_phi: float) -> np.ndarray:
    w, U = _rotation_eig(N, float(alpha), float(theta_hyp))
    return U @ (np.exp(-1j * delta_phi * w) * (U.conj().T @ state))


@dataclass(frozen=True, eq=False)
class EchoResult:
    delta_phi: float
    state: np.ndarray
    fidelity: float
    s_alpha_mean: float
    transverse_mean: tuple[float, float]

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity

    @property
    def transverse_signal(self) -> float:
        """Length of the mean transverse spin displacement, ``|(<S_e1>, <S_e2>)|``."""
        return math.hypot(*self.transverse_mean)


def _echo_from_forward(psi0, forward, prop, t, delta_phi, alpha, theta_hyp, e1, e2, s_alpha):
    N = prop.params.N
    kicked = _rotate(forward, N, alpha, theta_hyp, delta_phi)
    final = evolve(kicked, prop, -t)
    fidelity = float(abs(np.vdot(psi0, final)) ** 2)
    m1 = float(np.vdot(final, e1 @ final).real)
    m2 = float(np.vdot(final, e2 @ final).real)
    sa = float(np.vdot(final, s_alpha @ final).real)
    return EchoResult(float(delta_phi), final, fidelity, sa, (m1, m2))


def echo_protocol(psi0, prop: Propagator, t: float, delta_phi: float, alpha: float, theta_hyp: float) -> EchoResult:
    """``|psi_t(dphi)> = exp(+iHt) exp(-i dphi S_alpha) exp(-iHt) |psi0>`` with fidelity and readout."""
    return echo_scan(psi0, prop, t, [delta_phi], alpha, theta_hyp)[0]


def echo_scan(psi0, prop: Propagator, t: float, delta_phis, alpha: float, theta_hyp: float) -> list[EchoResult]:
    """Echo protocol for several perturbation strengths sharing one forward evolution."""
    psi0 = np.asarray(psi0, complex)
    ops = build_operators(prop.params.N)
    e1, e2 = transverse_operators(theta_hyp, ops)
    s_alpha = spin_alpha_operator(alpha, theta_hyp, ops)
    forward = evolve(psi0, prop, t)
    return [
        _echo_from_forward(psi0, forward, prop, t, dphi, alpha, theta_hyp, e1, e2, s_alpha)
        for dphi in np.atleast_1d(np.asarray(delta_phis, float))
    ]


def readout_gain(result: EchoResult, S: float) -> float:
    """Amplification ``G`` from ``signal = S sin(G dphi)``."""
    ratio = min(1.0, result.transverse_signal / S)
    return math.asin(ratio) / abs(result.delta_phi)


def qfi(state: np.ndarray, generator: np.ndarray) -> float:
    """Quantum Fisher information of a pure state, ``4 Var(generator)``."""
    return 4.0 * variance(state, generator)


def transverse_covariance(state: np.ndarray, theta_hyp: float, ops) -> np.ndarray:
    """Symmetrized 2x2 covariance of ``(S_e1, S_e2)``."""
    e1, e2 = transverse_operators(theta_hyp, ops)
    c11 = covariance(state, e1, e1)
    c22 = covariance(state, e2, e2)
    c12 = covariance(state, e1, e2)
    return np.array([[c11, c12], [c12, c22]])


def _alpha_of(vec) -> float:
    return float(np.mod(math.atan2(vec[1], vec[0]), math.pi))


def anti_squeezing(state: np.ndarray, theta_hyp: float, ops, method: str = "eig") -> tuple[float, float]:
    """``(xi_+^2, alpha_max)``: maximal transverse variance over ``S/2`` and its angle in ``[0, pi)``.

    ``method="eig"`` diagonalizes the transverse covariance; ``method="search"``
    scans ``Var(S_alpha)`` on 181 angles and refines with a bounded
    golden-section search. The angle is NaN when the covariance is isotropic.
    """
    S = ops.S
    if method == "eig":
        gamma_q = transverse_covariance(state, theta_hyp, ops)
        w, v = np.linalg.eigh(gamma_q)
        alpha = math.nan if w[1] - w[0] <= 1e-10 * max(1.0, w[1]) else _alpha_of(v[:, 1])
        return float(w[1] / (S / 2)), alpha
    if method == "search":
        def var_at(a):
            return variance(state, spin_alpha_operator(a, theta_hyp, ops), check=False)

        grid = np.linspace(0.0, math.pi, 181)
        vals = np.array([var_at(a) for a in grid])
        k = int(np.argmax(vals))
        step = grid[1] - grid[0]
        res = minimize_scalar(
            lambda a: -var_at(a), bounds=(grid[k] - step, grid[k] + step), method="bounded",
            options={"xatol": 1e-10},
        )
        best = max(vals[k], -res.fun)
        alpha = float(np.mod(res.x, math.pi)) if -res.fun >= vals[k] else float(grid[k])
        if vals.max() - vals.min() <= 1e-10 * max(1.0, vals.max()):
            alpha = math.nan
        return float(best / (S / 2)), alpha
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True, eq=False)
class GainCurve:
    params: ModelParams
    times: np.ndarray
    gain_sq: np.ndarray
    alpha_max: np.ndarray
    alpha_policy: str | float

    @property
    def ln_gain_sq(self) -> np.ndarray:
        return np.log(self.gain_sq)


def _resolve_policy(alpha_policy):
    if alpha_policy in ("optimal", None):
        return "optimal"
    if isinstance(alpha_policy, str) and alpha_policy.startswith("fixed"):
        inner = alpha_policy[5:].strip("():= ")
        return float(inner) if inner else math.pi / 4
    return float(alpha_policy)


def gain_curve(params: ModelParams, t_grid, alpha_policy="optimal") -> GainCurve:
    """``G^2(t) = xi_+^2(t)`` for the coherent state started on the hyperbolic point.

    ``alpha_policy`` is ``"optimal"`` (maximize over the angle at each time)
    or a fixed angle in radians, for which ``G^2 = Var(S_alpha) / (S/2)``.
    """
    policy = _resolve_policy(alpha_policy)
    init = hyperbolic_initial_state(params)
    prop = build_propagator(params)
    ops = build_operators(params.N)
    S = params.S
    times = np.asarray(t_grid, float)
    gains = np.empty(times.size)
    alphas = np.empty(times.size)
    coeffs = prop.vectors.T @ init.state
    fixed_op = None if policy == "optimal" else spin_alpha_operator(policy, init.theta_hyp, ops)
    for i, t in enumerate(times):
        psi = prop.vectors @ (np.exp(-1j * prop.energies * t) * coeffs)
        if fixed_op is None:
            gains[i], alphas[i] = anti_squeezing(psi, init.theta_hyp, ops)
        else:
            gains[i] = variance(psi, fixed_op, check=False) / (S / 2)
            alphas[i] = policy
    return GainCurve(params, times, gains, alphas, policy)


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    t_start: float
    t_end: float
    variation: float


def fit_growth_rate(times, ln_gain, window: int | None = None, max_variation: float = 0.05) -> GrowthFit:
    """Least-squares slope of ``ln G^2`` over its steadiest window.

    Only the growth phase (up to the first decrease) is searched. The
    variation of a window is the spread of the pointwise slopes inside it
    relative to their mean. With ``window=None`` the longest window whose
    variation stays below ``max_variation`` is used; for a fixed ``window``
    (in points) the window of minimal variation is used. Ties go to the
    smaller variation, then to the earlier start.
    """
    t = np.asarray(times, float)
    y = np.asarray(ln_gain, float)
    drops = np.nonzero(np.diff(y) <= 0)[0]
    end = int(drops[0]) + 1 if drops.size else y.size
    t, y = t[:end], y[:end]
    if t.size < 3:
        raise DomainError(f"growth phase has only {t.size} points")
    local = np.diff(y) / np.diff(t)
    n = t.size

    def variation(i, k):
        seg = local[i : k - 1]
        return float((seg.max() - seg.min()) / seg.mean())

    best = None  # (length, -variation, -start)
    if window is None:
        for i in range(n - 2):
            lo = hi = local[i]
            total = 0.0
            k = i
            while k < n - 1:
                lo = min(lo, local[k])
                hi = max(hi, local[k])
                total += local[k]
                if (hi - lo) * (k - i + 1) > max_variation * total:
                    break
                k += 1
            length = k - i + 1  # points covered by slopes local[i:k]
            if length >= 3:
                key = (length, -variation(i, i + length), -i)
                if best is None or key > best:
                    best = key
    else:
        if window < 3 or window > n:
            raise DomainError(f"window of {window} points does not fit a growth phase of {n}")
        for i in range(n - window + 1):
            key = (window, -variation(i, i + window), -i)
            if best is None or key > best:
                best = key
    if best is None:
        raise DomainError("no growth window found")
    length, negvar, negstart = best
    i = -negstart
    sl = slice(i, i + length)
    slope, intercept = np.polyfit(t[sl], y[sl], 1)
    return GrowthFit(float(slope), float(intercept), float(t[i]), float(t[i + length - 1]), -negvar)


def infidelity_curve(params: ModelParams, t: float, delta_phis, alpha: float | None = None):
    """``(delta_phis, 1 - F)`` at time ``t``; ``alpha`` defaults to the optimal angle at ``t``."""
    init = hyperbolic_initial_state(params)
    prop = build_propagator(params)
    if alpha is None:
        ops = build_operators(params.N)
        _, alpha = anti_squeezing(evolve(init.state, prop, t), init.theta_hyp, ops)
        if math.isnan(alpha):
            alpha = math.pi / 4
    results = echo_scan(init.state, prop, t, delta_phis, alpha, init.theta_hyp)
    return np.asarray(delta_phis, float), np.array([r.infidelity for r in results])


def lmg_field_for_lambda(lambda_target: float, J: float = 1.0) -> float:
    """Field ``h <= J`` with ``2 sqrt(h (2J - h)) = lambda_target``."""
    if not 0 < lambda_target <= 2 * J * (1 + 1e-12):
        raise DomainError(f"lambda={lambda_target} is unreachable for K=0 (needs 0 < lambda <= 2J)")
    disc = max(0.0, J * J - lambda_target**2 / 4.0)
    return J - math.sqrt(disc)


@dataclass(frozen=True)
class MatchedPair:
    lmg: ModelParams
    quartic: ModelParams
    lambda_lmg: float
    lambda_quartic: float


def matched_lambda_comparison(
    lambda_target: float, J: float = 1.0, K_over_J: float = 1.5, N: int = 500, tol: float = 1e-6
) -> MatchedPair:
    """LMG and triple-well parameters sharing the same local Lyapunov exponent.

    The quartic set lies on the line ``K = K_over_J * J`` just above the
    bifurcation ``h = 2J``, where the exponent rises from zero; ``h`` is found
    by Brent's method between ``2J`` and the exponent's peak.
    """
    lmg = ModelParams(h=lmg_field_for_lambda(lambda_target, J), J=J, K=0.0, N=N)
    lam_lmg = local_lyapunov(lmg)
    if K_over_J <= 0.25:
        raise DomainError("the triple-well region needs K/J > 1/4")
    K = K_over_J * J
    h_lo = 2.0 * J
    h_hi = J * (2.0 + (math.sqrt(8 * (1 + 2 * K_over_J) ** 3 / (27 * K_over_J)) - 2.0))

    def lam_at(h):
        return local_lyapunov(ModelParams(h=h, J=J, K=K, N=N))

    peak = minimize_scalar(lambda h: -lam_at(h), bounds=(h_lo, h_hi), method="bounded", options={"xatol": 1e-10})
    if -peak.fun < lambda_target:
        raise DomainError(
            f"lambda={lambda_target} unreachable along K/J={K_over_J} (peak {-peak.fun:.6g})"
        )
    h = brentq(lambda x: lam_at(x) - lambda_target, h_lo * (1 + 1e-12), peak.x, xtol=1e-14, rtol=1e-15)
    quartic = ModelParams(h=h, J=J, K=K, N=N)
    lam_q = lam_at(h)
    if abs(lam_q - lambda_target) > tol or abs(lam_lmg - lambda_target) > tol:
        raise DomainError(f"matched lambda failed: LMG {lam_lmg}, quartic {lam_q}, target {lambda_target}")
    return MatchedPair(lmg, quartic, lam_lmg, lam_q)


def husimi(state: np.ndarray, theta, phi, normalize: bool = True):
    """Husimi function ``|<theta, phi|psi>|^2`` on arbitrary nodes, scaled to max 1 by default."""
    values = kernels.husimi_values(np.asarray(state, complex), theta, phi)
    if normalize:
        peak = float(np.max(values))
        if peak > 0:
            values = values / peak
    return values


@dataclass(frozen=True, eq=False)
class HusimiField:
    Q: np.ndarray
    P: np.ndarray
    values: np.ndarray  # normalized to max 1
    raw: np.ndarray


def husimi_disk(state: np.ndarray, resolution: int = 201) -> HusimiField:
    """Husimi function on the nodes of a ``resolution^2`` lattice over ``[-2, 2]^2`` inside the disk."""
    axis = np.linspace(-2.0, 2.0, resolution)
    Qg, Pg = np.meshgrid(axis, axis, indexing="ij")
    inside = Qg**2 + Pg**2 <= 4.0
    Q = Qg[inside]
    P = Pg[inside]
    theta, phi = disk_to_bloch(Q, P)
    raw = kernels.husimi_values(np.asarray(state, complex), theta, phi)
    peak = raw.max()
    return HusimiField(Q, P, raw / peak if peak > 0 else raw, raw)


def husimi_sphere_norm(state: np.ndarray, n_theta: int = 200, n_phi: int = 200) -> float:
    """Midpoint-rule value of ``(N+1)/(4 pi) * integral Q(theta, phi) dOmega`` (equals 1 exactly)."""
    N = np.asarray(state).size - 1
    th = (np.arange(n_theta) + 0.5) * math.pi / n_theta
    ph = (np.arange(n_phi) + 0.5) * 2 * math.pi / n_phi
    T, Ph = np.meshgrid(th, ph, indexing="ij")
    vals = kernels.husimi_values(np.asarray(state, complex), T, Ph)
    integral = np.sum(vals * np.sin(T)) * (math.pi / n_theta) * (2 * math.pi / n_phi)
    return float(integral * (N + 1) / (4 * math.pi))


def separatrix(params: ModelParams, resolution: int = 401) -> list[np.ndarray]:
    """Level set ``H(Q, P) = H(Q_hyp, 0)`` inside the disk as a list of ``(n, 2)`` polylines.

    Traced with marching squares, then each node is pulled onto the level set
    by Newton steps along the gradient.
    """
    import contourpy

    try:
        fp = hyperbolic_point(params)
    except RegionError:
        return []
    level = float(hamiltonian_qp(fp.Q, 0.0, params))
    axis = np.linspace(-2.0, 2.0, resolution)
    Qg, Pg = np.meshgrid(axis, axis, indexing="xy")
    H = hamiltonian_qp(Qg, Pg, params)
    outside = Qg**2 + Pg**2 > 4.0
    gen = contourpy.contour_generator(axis, axis, np.ma.masked_array(H, mask=outside), line_type="Separate")
    lines = []
    for line in gen.lines(level):
        pts = np.array(line, float)
        for _ in range(4):
            e = hamiltonian_qp(pts[:, 0], pts[:, 1], params) - level
            gq, gp = hamiltonian_gradient(pts[:, 0], pts[:, 1], params)
            g2 = gq * gq + gp * gp
            ok = g2 > 1e-12
            step = np.where(ok, e / np.where(ok, g2, 1.0), 0.0)
            pts[:, 0] -= step * gq
            pts[:, 1] -= step * gp
        r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        pts = pts[r2 <= 4.0 + 1e-12]
        if len(pts) >= 2:
            lines.append(pts)
    return lines


def energy_expectation(state: np.ndarray, params: ModelParams) -> float:
    H = build_hamiltonian(params)
    return float(np.vdot(state, H @ state).real)

