"""Mean-field limit: disk-coordinate Hamiltonian, fixed points, regions, Lyapunov exponents.

The Bloch sphere is charted by canonical coordinates ``(Q, P)`` with
``Q = r cos(phi)``, ``P = -r sin(phi)``, ``r = sqrt(2 (1 + cos(theta)))``.
The south pole sits at the origin and the north pole on the circle
``Q^2 + P^2 = 4``. All fixed points lie on ``P = 0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import DEFAULT_TOLERANCES
from .errors import DomainError, RegionError
from .spin_core import ModelParams

__all__ = [
    "PhasePoint",
    "FixedPoint",
    "RegionLabel",
    "CubicSolution",
    "LyapunovMap",
    "MaxLyapunovLine",
    "disk_to_bloch",
    "bloch_to_disk",
    "spin_components",
    "classical_hamiltonian",
    "hamiltonian_qp",
    "hamiltonian_gradient",
    "effective_potential",
    "potential_derivative",
    "solve_fixed_point_cubic",
    "find_fixed_points",
    "scan_fixed_points",
    "h2_boundary",
    "classify_region",
    "jacobian_at",
    "lyapunov_exponent",
    "local_lyapunov",
    "hyperbolic_point",
    "lyapunov_map",
    "fit_max_lyapunov_line",
]

DISK_RADIUS_SQ = 4.0


def disk_to_bloch(Q, P):
    """``(theta, phi)`` for disk coordinates; ``phi`` in ``(-pi, pi]``.

    Uses ``r = 2 cos(theta/2)``, which equals ``sqrt(2 (1 + cos theta))`` but
    keeps full precision near the south pole.
    """
    r = np.hypot(np.asarray(Q, float), np.asarray(P, float))
    theta = 2.0 * np.arccos(np.clip(r / 2.0, 0.0, 1.0))
    phi = np.arctan2(-np.asarray(P, float), np.asarray(Q, float))
    return theta, phi


def bloch_to_disk(theta, phi):
    r = 2.0 * np.cos(np.asarray(theta, float) / 2.0)
    return r * np.cos(phi), -r * np.sin(phi)


def spin_components(Q, P):
    """Unit spin vector ``(s_x, s_y, s_z)`` at disk coordinates."""
    Q = np.asarray(Q, float)
    P = np.asarray(P, float)
    r2 = Q * Q + P * P
    root = np.sqrt(np.clip(1.0 - r2 / 4.0, 0.0, None))
    return Q * root, -P * root, r2 / 2.0 - 1.0


@dataclass(frozen=True)
class PhasePoint:
    Q: float
    P: float = 0.0

    def __post_init__(self):
        if self.Q * self.Q + self.P * self.P > DISK_RADIUS_SQ * (1 + 1e-12):
            raise DomainError(f"({self.Q}, {self.P}) lies outside the disk Q^2 + P^2 <= 4")

    @classmethod
    def from_bloch(cls, theta: float, phi: float) -> "PhasePoint":
        Q, P = bloch_to_disk(theta, phi)
        return cls(float(Q), float(P))

    @property
    def bloch(self) -> tuple[float, float]:
        theta, phi = disk_to_bloch(self.Q, self.P)
        return float(theta), float(phi)


def _check_disk(Q, P):
    r2 = np.asarray(Q, float) ** 2 + np.asarray(P, float) ** 2
    if np.any(r2 > DISK_RADIUS_SQ * (1 + 1e-12)):
        raise DomainError("point(s) outside the disk Q^2 + P^2 <= 4")


def hamiltonian_qp(Q, P, params: ModelParams):
    """Mean-field energy per spin, vectorized, no domain check."""
    h, J, K = params.h, params.J, params.K
    Q2 = np.asarray(Q, float) ** 2
    P2 = np.asarray(P, float) ** 2
    Q4 = Q2 * Q2
    return (
        -2.0 * h
        + h * (Q2 + P2)
        - 2.0 * J * Q2
        + 0.5 * J * Q2 * P2
        + 0.5 * J * Q4
        - 2.0 * K * Q4
        + K * Q4 * P2
        - 0.125 * K * Q4 * P2 * P2
        + K * Q4 * Q2
        - 0.25 * K * Q4 * Q2 * P2
        - 0.125 * K * Q4 * Q4
    )


def classical_hamiltonian(point, params: ModelParams):
    """Energy at a :class:`PhasePoint` or a ``(Q, P)`` pair; raises outside the disk."""
    if isinstance(point, PhasePoint):
        Q, P = point.Q, point.P
    else:
        Q, P = point
    _check_disk(Q, P)
    value = hamiltonian_qp(Q, P, params)
    return float(value) if np.ndim(value) == 0 else value


def hamiltonian_gradient(Q, P, params: ModelParams):
    """``(dH/dQ, dH/dP)``."""
    h, J, K = params.h, params.J, params.K
    Q = np.asarray(Q, float)
    P = np.asarray(P, float)
    Q2, P2 = Q * Q, P * P
    dQ = Q * (
        2.0 * h
        - 4.0 * J
        + J * P2
        + 2.0 * J * Q2
        - 8.0 * K * Q2
        + 4.0 * K * Q2 * P2
        - 0.5 * K * Q2 * P2 * P2
        + 6.0 * K * Q2 * Q2
        - 1.5 * K * Q2 * Q2 * P2
        - K * Q2**3
    )
    dP = P * (2.0 * h + J * Q2 + 2.0 * K * Q2 * Q2 - 0.5 * K * Q2 * Q2 * P2 - 0.5 * K * Q2**3)
    return dQ, dP


def effective_potential(Q, params: ModelParams):
    """``V(Q) = H(Q, 0) = -2h + (h - 2J) Q^2 + (J/2 - 2K) Q^4 + K Q^6 - K Q^8 / 8``."""
    h, J, K = params.h, params.J, params.K
    x = np.asarray(Q, float) ** 2
    value = -2.0 * h + x * ((h - 2.0 * J) + x * ((0.5 * J - 2.0 * K) + x * (K - 0.125 * K * x)))
    return float(value) if np.ndim(value) == 0 else value


def potential_derivative(Q, params: ModelParams):
    h, J, K = params.h, params.J, params.K
    Q = np.asarray(Q, float)
    x = Q * Q
    value = Q * (2.0 * (h - 2.0 * J) + x * ((2.0 * J - 8.0 * K) + x * (6.0 * K - K * x)))
    return float(value) if np.ndim(value) == 0 else value


def uv_coefficients(Q, params: ModelParams):
    """Jacobian entries ``u = d2H/dP2`` and ``v = -d2H/dQ2`` on the ``P = 0`` axis."""
    h, J, K = params.h, params.J, params.K
    x = np.asarray(Q, float) ** 2
    u = 2.0 * h + J * x + 2.0 * K * x**2 - 0.5 * K * x**3
    v = -2.0 * h + 4.0 * J - 6.0 * J * x + 24.0 * K * x - 30.0 * K * x**2 + 7.0 * K * x**3
    if np.ndim(u) == 0:
        return float(u), float(v)
    return u, v


@dataclass(frozen=True)
class CubicSolution:
    """Real roots ``x = Q^2`` of the fixed-point cubic and its discriminant."""

    roots: tuple[float, ...]
    discriminant: float
    kind: str  # "three-real", "one-real", "repeated"


def _discriminant(params: ModelParams) -> tuple[float, float, float]:
    # depressed cubic z^3 + c z + d = 0 with x = z + 2
    c = -2.0 * (params.J + 2.0 * params.K) / params.K
    d = -2.0 * params.h / params.K
    return c, d, -(4.0 * c**3 + 27.0 * d**2)


def solve_fixed_point_cubic(params: ModelParams, merge_tol: float | None = None) -> CubicSolution:
    """Solve ``x^3 - 6x^2 + (8 - 2J/K) x - 2(h - 2J)/K = 0`` by Cardano's method.

    Branches on the sign of the discriminant of the depressed cubic; the
    roots are polished with two Newton steps and merged when closer than
    ``merge_tol``. Requires ``K > 0``.
    """
    if params.K <= 0:
        raise DomainError("the cubic branch needs K > 0")
    merge_tol = DEFAULT_TOLERANCES.root_merge if merge_tol is None else merge_tol
    c, d, disc = _discriminant(params)
    scale = abs(4.0 * c**3) + 27.0 * d**2
    if abs(disc) <= 1e-14 * scale:
        z1 = 3.0 * d / c
        z2 = -1.5 * d / c
        zs = [z1, z2, z2]
        kind = "repeated"
    elif disc > 0:
        r = 2.0 * math.sqrt(-c / 3.0)
        arg = min(1.0, max(-1.0, 1.5 * d / c * math.sqrt(-3.0 / c)))
        ang = math.acos(arg) / 3.0
        zs = [r * math.cos(ang - 2.0 * math.pi * k / 3.0) for k in range(3)]
        kind = "three-real"
    else:
        s = math.sqrt(d * d / 4.0 + c**3 / 27.0)
        zs = [np.cbrt(-d / 2.0 + s) + np.cbrt(-d / 2.0 - s)]
        kind = "one-real"

    b1 = 8.0 - 2.0 * params.J / params.K
    b0 = -2.0 * (params.h - 2.0 * params.J) / params.K
    roots = []
    for z in zs:
        x = float(z) + 2.0
        for _ in range(2):
            f = ((x - 6.0) * x + b1) * x + b0
            fp = (3.0 * x - 12.0) * x + b1
            if abs(fp) > 1e-8:
                x -= f / fp
        if not any(abs(x - y) <= merge_tol for y in roots):
            roots.append(x)
    return CubicSolution(tuple(sorted(roots)), disc, kind)


@dataclass(frozen=True)
class FixedPoint:
    Q: float
    stability: str  # "hyperbolic" or "minimum"
    u: float
    v: float

    @property
    def P(self) -> float:
        return 0.0

    @property
    def location(self) -> PhasePoint:
        return PhasePoint(self.Q, 0.0)

    @property
    def is_hyperbolic(self) -> bool:
        return self.stability == "hyperbolic"

    @property
    def bloch_theta(self) -> float:
        return math.acos(min(1.0, max(-1.0, self.Q * self.Q / 2.0 - 1.0)))

    @property
    def bloch_phi(self) -> float:
        return 0.0 if self.Q >= 0 else math.pi


def _make_fixed_point(Q: float, params: ModelParams, hyp_tol: float) -> FixedPoint:
    u, v = uv_coefficients(Q, params)
    return FixedPoint(Q=Q, stability="hyperbolic" if u * v > hyp_tol else "minimum", u=u, v=v)


WEAK_QUARTIC = 1e-12  # below this K/J the cubic's outer roots leave the disk and Cardano overflows


def _weak_quartic_root(params: ModelParams) -> float:
    """Root near ``2 - h/J`` of ``K x^3 - 6K x^2 + (8K - 2J) x - 2(h - 2J)`` by Newton from the ``K = 0`` value."""
    h, J, K = params.h, params.J, params.K
    x = 2.0 - h / J
    for _ in range(3):
        f = ((K * x - 6.0 * K) * x + 8.0 * K - 2.0 * J) * x - 2.0 * (h - 2.0 * J)
        fp = (3.0 * K * x - 12.0 * K) * x + 8.0 * K - 2.0 * J
        x -= f / fp
    return x


def find_fixed_points(params: ModelParams, tol=DEFAULT_TOLERANCES) -> list[FixedPoint]:
    """Origin plus every symmetric pair ``(+-sqrt(x), 0)`` with ``0 < x <= 4``, sorted by ``Q``."""
    if params.J == 0 and params.K == 0:
        raise DomainError("all couplings J and K vanish; fixed points are not isolated")
    if params.K == 0:
        xs = [2.0 - params.h / params.J]
    elif params.K < WEAK_QUARTIC * abs(params.J):
        xs = [_weak_quartic_root(params)]
    else:
        xs = list(solve_fixed_point_cubic(params, tol.root_merge).roots)
    points = [_make_fixed_point(0.0, params, tol.hyperbolic)]
    for x in xs:
        if x <= tol.root_merge or x > DISK_RADIUS_SQ + 1e-12:
            continue
        Q = math.sqrt(min(x, DISK_RADIUS_SQ))
        points.append(_make_fixed_point(Q, params, tol.hyperbolic))
        points.append(_make_fixed_point(-Q, params, tol.hyperbolic))
    return sorted(points, key=lambda fp: fp.Q)


def scan_fixed_points(params: ModelParams, step: float = 1e-5) -> np.ndarray:
    """Independent root finder: sign changes of ``V'(Q)`` on ``|Q| <= 2`` refined by bisection."""
    return kernels.vprime_scan(params.h, params.J, params.K, step)


def h2_boundary(K_over_J: float) -> float:
    """Upper edge of the triple-well region, ``sqrt(8 (1 + 2k)^3 / (27 k))``; ``inf`` for ``k = 0``."""
    if K_over_J <= 0:
        return math.inf
    return math.sqrt(8.0 * (1.0 + 2.0 * K_over_J) ** 3 / (27.0 * K_over_J))


@dataclass(frozen=True)
class RegionLabel:
    region: str | None  # "I", "II", "III" or None on a boundary line
    boundary: str | None  # "h1", "h2" or None
    h1: float
    h2: float
    discriminant: float | None

    @property
    def is_boundary(self) -> bool:
        return self.boundary is not None

    @property
    def label(self) -> str:
        return self.region if self.region is not None else f"boundary-{self.boundary}"


def classify_region(params: ModelParams, tol=DEFAULT_TOLERANCES) -> RegionLabel:
    hj = params.h_over_J
    kj = params.K_over_J
    h2 = h2_boundary(kj)
    disc = _discriminant(params)[2] if params.K >= WEAK_QUARTIC * abs(params.J) else None
    btol = tol.boundary

    def label(region, boundary=None):
        return RegionLabel(region, boundary, 2.0, h2, disc)

    if abs(hj - 2.0) <= btol * 2.0:
        return label(None, "h1")
    if hj < 2.0:
        return label("I")
    if kj > 0.25:
        if abs(hj - h2) <= btol * max(1.0, h2):
            return label(None, "h2")
        if hj < h2:
            return label("II")
    return label("III")


def jacobian_at(fp: FixedPoint, params: ModelParams) -> np.ndarray:
    """Linearized flow ``d(dQ, dP)/dt = A (dQ, dP)`` with ``A = [[0, u], [v, 0]]``."""
    u, v = uv_coefficients(fp.Q, params)
    return np.array([[0.0, u], [v, 0.0]])


def lyapunov_exponent(fp: FixedPoint, params: ModelParams, tol=DEFAULT_TOLERANCES) -> float | None:
    """``sqrt(u v)`` at a hyperbolic point, ``0.0`` at a degenerate one, ``None`` when elliptic."""
    u, v = uv_coefficients(fp.Q, params)
    uv = u * v
    if uv > tol.hyperbolic:
        return math.sqrt(uv)
    if uv >= -tol.hyperbolic:
        return 0.0
    return None


def local_lyapunov(params: ModelParams, tol=DEFAULT_TOLERANCES) -> float:
    """Largest exponent over all hyperbolic fixed points (0 when there are none)."""
    best = 0.0
    for fp in find_fixed_points(params, tol):
        lam = lyapunov_exponent(fp, params, tol)
        if lam is not None and lam > best:
            best = lam
    return best


def hyperbolic_point(params: ModelParams, tol=DEFAULT_TOLERANCES) -> FixedPoint:
    """The hyperbolic point with the largest ``Q`` (origin in the double-well region)."""
    hyp = [fp for fp in find_fixed_points(params, tol) if fp.is_hyperbolic]
    if not hyp:
        raise RegionError(f"no hyperbolic fixed point for h={params.h}, J={params.J}, K={params.K}")
    return max(hyp, key=lambda fp: fp.Q)


REGION_NAMES = {
    kernels.REGION_BOUNDARY: "boundary",
    kernels.REGION_I: "I",
    kernels.REGION_II: "II",
    kernels.REGION_III: "III",
}


@dataclass(frozen=True, eq=False)
class LyapunovMap:
    h_over_J: np.ndarray
    K_over_J: np.ndarray
    lam: np.ndarray  # shape (len(h_over_J), len(K_over_J))
    region: np.ndarray  # int8 codes, see REGION_NAMES
    J: float = 1.0
    backend: str = field(default=kernels.BACKEND)

    def rows(self):
        """``(h_over_J, K_over_J, lambda, region)`` tuples in h-major order."""
        for i, h in enumerate(self.h_over_J):
            for j, k in enumerate(self.K_over_J):
                yield float(h), float(k), float(self.lam[i, j]), REGION_NAMES[int(self.region[i, j])]


def _resolution_pair(resolution) -> tuple[int, int]:
    if np.ndim(resolution) == 0:
        return int(resolution), int(resolution)
    nh, nk = resolution
    return int(nh), int(nk)


def lyapunov_map(
    h_range=(0.0, 6.0),
    K_range=(0.0, 4.0),
    resolution=300,
    J: float = 1.0,
    workers: int = 1,
    tol=DEFAULT_TOLERANCES,
) -> LyapunovMap:
    """Maximal local Lyapunov exponent on a uniform ``(h/J, K/J)`` grid.

    Cells without a hyperbolic point carry ``lambda = 0``. Rows of the grid
    are split across ``workers`` threads; the result does not depend on it.
    """
    nh, nk = _resolution_pair(resolution)
    if nh < 2 or nk < 2:
        raise DomainError("lyapunov_map needs at least 2 points per axis")
    hj = np.linspace(h_range[0], h_range[1], nh)
    kj = np.linspace(K_range[0], K_range[1], nk)
    h = hj * J
    K = kj * J

    def block(idx):
        return kernels.lyapunov_grid(h[idx], K, J, tol.hyperbolic, tol.root_merge, tol.boundary)

    chunks = np.array_split(np.arange(nh), max(1, min(int(workers), nh)))
    if len(chunks) == 1:
        results = [block(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(block, chunks))
    lam = np.concatenate([r[0] for r in results], axis=0)
    region = np.concatenate([r[1] for r in results], axis=0)
    return LyapunovMap(hj, kj, lam, region, J)


@dataclass(frozen=True, eq=False)
class MaxLyapunovLine:
    slope: float
    intercept: float
    h_points: np.ndarray
    K_points: np.ndarray
    rms_residual: float


def fit_max_lyapunov_line(lmap: LyapunovMap, refine: bool = True, min_points: int = 5) -> MaxLyapunovLine:
    """Least-squares line ``K = slope * h + intercept`` through the ridge of maximal ``lambda``.

    At fixed ``K`` the exponent in the triple-well region rises from zero at
    ``h = 2J``, peaks, and falls back to zero at ``h2``; the ridge point of
    each ``K`` row is that peak. Rows whose peak sits on the grid edge or
    outside the triple-well region are skipped. With ``refine`` the discrete
    argmax is sharpened by a three-point parabola.
    """
    hj = lmap.h_over_J
    dh = hj[1] - hj[0]
    hs, ks = [], []
    for j, k in enumerate(lmap.K_over_J):
        col = np.where(lmap.region[:, j] == kernels.REGION_II, lmap.lam[:, j], 0.0)
        i = int(np.argmax(col))
        if col[i] <= 0 or i == 0 or i == len(hj) - 1:
            continue
        if col[i - 1] <= 0 or col[i + 1] <= 0:
            continue
        h_peak = hj[i]
        if refine:
            y0, y1, y2 = col[i - 1], col[i], col[i + 1]
            curv = y0 - 2.0 * y1 + y2
            if curv < 0:
                h_peak += 0.5 * (y0 - y2) / curv * dh
        hs.append(h_peak)
        ks.append(k)
    if len(hs) < min_points:
        raise RegionError(f"only {len(hs)} ridge points inside the triple-well region; need {min_points}")
    hs = np.asarray(hs)
    ks = np.asarray(ks)
    slope, intercept = np.polyfit(hs, ks, 1)
    resid = ks - (slope * hs + intercept)
    return MaxLyapunovLine(float(slope), float(intercept), hs, ks, float(np.sqrt(np.mean(resid**2))))
