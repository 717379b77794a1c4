"""NumPy implementations of the hot loops; used when the compiled module is absent."""

from __future__ import annotations


import numpy as np
from scipy.special import gammaln

BACKEND = "python"

REGION_BOUNDARY = 0
REGION_I = 1
REGION_II = 2
REGION_III = 3

WEAK_QUARTIC = 1e-12  # K/J below which the cubic is replaced by the perturbed K = 0 root


def _cubic_roots_grid(h, J, K):
    """Real roots x of the fixed-point cubic for arrays of couplings (K > 0).

    Returns an ``(..., 3)`` array padded with NaN.
    """
    h, K = np.broadcast_arrays(np.asarray(h, float), np.asarray(K, float))
    c = -2.0 * (J + 2.0 * K) / K
    d = -2.0 * h / K
    disc = -(4.0 * c**3 + 27.0 * d**2)
    out = np.full(h.shape + (3,), np.nan)

    three = disc >= 0
    if np.any(three):
        cc, dd = c[three], d[three]
        r = 2.0 * np.sqrt(-cc / 3.0)
        arg = np.clip(1.5 * dd / cc * np.sqrt(-3.0 / cc), -1.0, 1.0)
        ang = np.arccos(arg) / 3.0
        for k in range(3):
            out[three, k] = r * np.cos(ang - 2.0 * np.pi * k / 3.0) + 2.0
    one = ~three
    if np.any(one):
        cc, dd = c[one], d[one]
        s = np.sqrt(dd**2 / 4.0 + cc**3 / 27.0)
        out[one, 0] = np.cbrt(-dd / 2.0 + s) + np.cbrt(-dd / 2.0 - s) + 2.0

    # Newton polish on x^3 - 6x^2 + b1 x + b0
    b1 = (8.0 - 2.0 * J / K)[..., None]
    b0 = (-2.0 * (h - 2.0 * J) / K)[..., None]
    x = out
    for _ in range(2):
        f = ((x - 6.0) * x + b1) * x + b0
        fp = (3.0 * x - 12.0) * x + b1
        ok = np.abs(fp) > 1e-8
        x = np.where(ok, x - f / np.where(ok, fp, 1.0), x)
    return x


def _weak_roots(h, J, K):
    """Root near ``2 - h/J`` of ``K x^3 - 6K x^2 + (8K - 2J) x - 2(h - 2J)``; exact for ``K = 0``."""
    x = 2.0 - h / J
    for _ in range(3):
        f = ((K * x - 6.0 * K) * x + 8.0 * K - 2.0 * J) * x - 2.0 * (h - 2.0 * J)
        fp = (3.0 * K * x - 12.0 * K) * x + 8.0 * K - 2.0 * J
        x = x - f / fp
    return x


def _uv(h, J, K, Q):
    x = Q * Q
    u = 2.0 * h + J * x + 2.0 * K * x * x - 0.5 * K * x**3
    v = -2.0 * h + 4.0 * J - 6.0 * J * x + 24.0 * K * x - 30.0 * K * x * x + 7.0 * K * x**3
    return u, v


def region_codes(h_over_J, K_over_J, boundary_tol=1e-12):
    hj, kj = np.broadcast_arrays(np.asarray(h_over_J, float), np.asarray(K_over_J, float))
    with np.errstate(divide="ignore", invalid="ignore"):
        h2 = np.where(kj > 0, np.sqrt(8.0 * (1.0 + 2.0 * kj) ** 3 / (27.0 * kj)), np.inf)
    codes = np.full(hj.shape, REGION_III, dtype=np.int8)
    codes[hj < 2.0] = REGION_I
    second = (kj > 0.25) & (hj > 2.0) & (hj < h2)
    codes[second] = REGION_II
    tol2 = boundary_tol * np.maximum(1.0, np.where(np.isfinite(h2), h2, 1.0))
    on_h2 = (kj > 0.25) & (np.abs(hj - h2) <= tol2)
    codes[on_h2] = REGION_BOUNDARY
    codes[np.abs(hj - 2.0) <= boundary_tol * 2.0] = REGION_BOUNDARY
    return codes


def lyapunov_grid(h_values, K_values, J=1.0, hyp_tol=1e-10, merge_tol=1e-9, boundary_tol=1e-12):
    """Maximal local Lyapunov exponent and region code on an ``h x K`` grid."""
    h_values = np.asarray(h_values, float)
    K_values = np.asarray(K_values, float)
    H, Kg = np.meshgrid(h_values, K_values, indexing="ij")

    # origin: u = 2h, v = 4J - 2h
    uv0 = 2.0 * H * (4.0 * J - 2.0 * H)
    lam = np.where(uv0 > hyp_tol, np.sqrt(np.abs(uv0)), 0.0)

    pos = (Kg > 0) & (Kg >= WEAK_QUARTIC * abs(J))
    roots = np.full(H.shape + (3,), np.nan)
    if np.any(pos):
        roots[pos] = _cubic_roots_grid(H[pos], J, Kg[pos])
    if J > 0 and np.any(~pos):
        roots[~pos, 0] = _weak_roots(H[~pos], J, Kg[~pos])
    valid = (roots > merge_tol) & (roots <= 4.0 + 1e-12)
    Q = np.sqrt(np.where(valid, np.minimum(roots, 4.0), 0.0))
    u, v = _uv(H[..., None], J, Kg[..., None], Q)
    uv = u * v
    hyp = valid & (uv > hyp_tol)
    lam_roots = np.where(hyp, np.sqrt(np.where(hyp, uv, 0.0)), 0.0).max(axis=-1)
    lam = np.maximum(lam, lam_roots)

    if J > 0:
        region = region_codes(H / J, Kg / J, boundary_tol)
    else:
        region = np.full(H.shape, REGION_BOUNDARY, dtype=np.int8)
    return lam, region


def _vprime(Q, h, J, K):
    x = Q * Q
    return Q * (2.0 * (h - 2.0 * J) + x * ((2.0 * J - 8.0 * K) + x * (6.0 * K - K * x)))


def vprime_scan(h, J, K, step=1e-5, qmax=2.0):
    """Roots of V'(Q) on [-qmax, qmax] by sign changes on a uniform grid, refined by bisection."""
    n = int(round(qmax / step))
    Q = np.arange(-n, n + 1) * step
    f = _vprime(Q, h, J, K)
    exact = Q[f == 0.0]
    sa = f[:-1]
    sb = f[1:]
    bracket = (sa != 0.0) & (np.sign(sa) * np.sign(sb) < 0)
    lo = Q[:-1][bracket].copy()
    hi = Q[1:][bracket].copy()
    flo = sa[bracket].copy()
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = _vprime(mid, h, J, K)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    roots = np.concatenate([exact, 0.5 * (lo + hi)])
    return np.sort(roots)


def _log_binom_half(N):
    n_up = np.arange(N + 1)
    return 0.5 * (gammaln(N + 1) - gammaln(n_up + 1) - gammaln(N - n_up + 1))


def husimi_values(amplitudes, theta, phi, chunk=2048):
    """``|<theta, phi|psi>|^2`` at each node (flat or broadcastable arrays)."""
    psi = np.asarray(amplitudes, complex)
    N = psi.size - 1
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    shape = theta.shape
    th = theta.ravel()
    ph = phi.ravel()
    out = np.empty(th.size)
    lb = _log_binom_half(N)
    n_up = np.arange(N + 1)
    n_down = N - n_up
    for start in range(0, th.size, chunk):
        t = th[start : start + chunk, None]
        p = ph[start : start + chunk, None]
        c = np.cos(t / 2)
        s = np.sin(t / 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            logc = np.where(n_up == 0, 0.0, n_up * np.log(c))
            logs = np.where(n_down == 0, 0.0, n_down * np.log(s))
        mod = np.exp(lb + logc + logs)
        overlap = (mod * np.exp(-1j * n_down * p)) @ psi
        out[start : start + chunk] = np.abs(overlap) ** 2
    return out.reshape(shape)
