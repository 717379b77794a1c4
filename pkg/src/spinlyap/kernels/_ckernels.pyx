# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the grid, scan and Husimi kernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, acos, cbrt, fabs, log, exp, lgamma, M_PI

cnp.import_array()

BACKEND = "cython"

cdef enum:
    C_BOUNDARY = 0
    C_REGION_I = 1
    C_REGION_II = 2
    C_REGION_III = 3

REGION_BOUNDARY = C_BOUNDARY
REGION_I = C_REGION_I
REGION_II = C_REGION_II
REGION_III = C_REGION_III


cdef inline int _cubic_roots(double h, double J, double K, double* x) noexcept nogil:
    # real roots of x^3 - 6x^2 + (8 - 2J/K) x - 2(h - 2J)/K, via the depressed form x = z + 2
    cdef double c = -2.0 * (J + 2.0 * K) / K
    cdef double d = -2.0 * h / K
    cdef double disc = -(4.0 * c * c * c + 27.0 * d * d)
    cdef double r, arg, ang, s, f, fp
    cdef double b1 = 8.0 - 2.0 * J / K
    cdef double b0 = -2.0 * (h - 2.0 * J) / K
    cdef int n, k, it
    if disc >= 0.0:
        r = 2.0 * sqrt(-c / 3.0)
        arg = 1.5 * d / c * sqrt(-3.0 / c)
        if arg > 1.0:
            arg = 1.0
        elif arg < -1.0:
            arg = -1.0
        ang = acos(arg) / 3.0
        for k in range(3):
            x[k] = r * cos(ang - 2.0 * M_PI * k / 3.0) + 2.0
        n = 3
    else:
        s = sqrt(d * d / 4.0 + c * c * c / 27.0)
        x[0] = cbrt(-d / 2.0 + s) + cbrt(-d / 2.0 - s) + 2.0
        n = 1
    for k in range(n):
        for it in range(2):
            f = ((x[k] - 6.0) * x[k] + b1) * x[k] + b0
            fp = (3.0 * x[k] - 12.0) * x[k] + b1
            if fabs(fp) > 1e-8:
                x[k] -= f / fp
    return n


cdef double WEAK_QUARTIC = 1e-12


cdef inline double _weak_root(double h, double J, double K) noexcept nogil:
    # root near 2 - h/J of K x^3 - 6K x^2 + (8K - 2J) x - 2(h - 2J); exact for K = 0
    cdef double xr = 2.0 - h / J
    cdef double f, fp
    cdef int it
    for it in range(3):
        f = ((K * xr - 6.0 * K) * xr + 8.0 * K - 2.0 * J) * xr - 2.0 * (h - 2.0 * J)
        fp = (3.0 * K * xr - 12.0 * K) * xr + 8.0 * K - 2.0 * J
        xr -= f / fp
    return xr


cdef inline double _lambda_at(double h, double J, double K, double Q, double hyp_tol) noexcept nogil:
    cdef double x = Q * Q
    cdef double u = 2.0 * h + J * x + 2.0 * K * x * x - 0.5 * K * x * x * x
    cdef double v = -2.0 * h + 4.0 * J - 6.0 * J * x + 24.0 * K * x - 30.0 * K * x * x + 7.0 * K * x * x * x
    cdef double uv = u * v
    if uv > hyp_tol:
        return sqrt(uv)
    return 0.0


cdef inline signed char _region(double hj, double kj, double btol) noexcept nogil:
    cdef double h2
    if fabs(hj - 2.0) <= btol * 2.0:
        return C_BOUNDARY
    if hj < 2.0:
        return C_REGION_I
    if kj > 0.25:
        h2 = sqrt(8.0 * (1.0 + 2.0 * kj) ** 3 / (27.0 * kj))
        if fabs(hj - h2) <= btol * (h2 if h2 > 1.0 else 1.0):
            return C_BOUNDARY
        if hj < h2:
            return C_REGION_II
    return C_REGION_III


def lyapunov_grid(h_values, K_values, double J=1.0, double hyp_tol=1e-10,
                  double merge_tol=1e-9, double boundary_tol=1e-12):
    """Maximal local Lyapunov exponent and region code on an ``h x K`` grid."""
    cdef double[::1] hv = np.ascontiguousarray(h_values, dtype=np.float64)
    cdef double[::1] kv = np.ascontiguousarray(K_values, dtype=np.float64)
    cdef Py_ssize_t nh = hv.shape[0], nk = kv.shape[0], i, j
    lam_arr = np.zeros((nh, nk), dtype=np.float64)
    reg_arr = np.zeros((nh, nk), dtype=np.int8)
    cdef double[:, ::1] lam = lam_arr
    cdef signed char[:, ::1] reg = reg_arr
    cdef double h, K, best, val, xr
    cdef double x[3]
    cdef int n, k
    with nogil:
        for i in range(nh):
            h = hv[i]
            for j in range(nk):
                K = kv[j]
                best = _lambda_at(h, J, K, 0.0, hyp_tol)
                if K > 0.0 and K >= WEAK_QUARTIC * fabs(J):
                    n = _cubic_roots(h, J, K, x)
                elif J > 0.0:
                    x[0] = _weak_root(h, J, K)
                    n = 1
                else:
                    n = 0
                for k in range(n):
                    xr = x[k]
                    if xr > merge_tol and xr <= 4.0 + 1e-12:
                        if xr > 4.0:
                            xr = 4.0
                        val = _lambda_at(h, J, K, sqrt(xr), hyp_tol)
                        if val > best:
                            best = val
                lam[i, j] = best
                if J > 0.0:
                    reg[i, j] = _region(h / J, K / J, boundary_tol)
                else:
                    reg[i, j] = C_BOUNDARY
    return lam_arr, reg_arr


cdef inline double _vprime(double Q, double h, double J, double K) noexcept nogil:
    cdef double x = Q * Q
    return Q * (2.0 * (h - 2.0 * J) + x * ((2.0 * J - 8.0 * K) + x * (6.0 * K - K * x)))


def vprime_scan(double h, double J, double K, double step=1e-5, double qmax=2.0):
    """Roots of V'(Q) on [-qmax, qmax] by sign changes on a uniform grid, refined by bisection."""
    cdef Py_ssize_t n = <Py_ssize_t>(qmax / step + 0.5)
    cdef Py_ssize_t k
    cdef double qa, qb, fa, fb, lo, hi, flo, mid, fm
    cdef int it
    roots = []
    qa = -n * step
    fa = _vprime(qa, h, J, K)
    for k in range(-n + 1, n + 1):
        qb = k * step
        fb = _vprime(qb, h, J, K)
        if fa == 0.0:
            roots.append(qa)
        elif (fa < 0.0 < fb) or (fb < 0.0 < fa):
            lo = qa
            hi = qb
            flo = fa
            for it in range(60):
                mid = 0.5 * (lo + hi)
                fm = _vprime(mid, h, J, K)
                if (fm < 0.0) == (flo < 0.0) and fm != 0.0:
                    lo = mid
                    flo = fm
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
        qa = qb
        fa = fb
    if fa == 0.0:
        roots.append(qa)
    return np.sort(np.array(roots, dtype=np.float64))


def husimi_values(amplitudes, theta, phi):
    """``|<theta, phi|psi>|^2`` at each node (flat or broadcastable arrays)."""
    psi_arr = np.ascontiguousarray(amplitudes, dtype=np.complex128)
    th_b, ph_b = np.broadcast_arrays(np.asarray(theta, dtype=np.float64),
                                     np.asarray(phi, dtype=np.float64))
    shape = th_b.shape
    cdef double[::1] th = np.ascontiguousarray(th_b.ravel())
    cdef double[::1] ph = np.ascontiguousarray(ph_b.ravel())
    cdef double complex[::1] psi = psi_arr
    cdef Py_ssize_t N = psi.shape[0] - 1, nn = th.shape[0], p, i
    out_arr = np.empty(nn, dtype=np.float64)
    cdef double[::1] out = out_arr
    lb_arr = np.empty(N + 1, dtype=np.float64)
    cdef double[::1] lb = lb_arr
    cdef double lgN = lgamma(N + 1.0)
    for i in range(N + 1):
        lb[i] = 0.5 * (lgN - lgamma(i + 1.0) - lgamma(N - i + 1.0))
    cdef double c, s, lc, ls, re, im, mod, ang, cr, ci, wr, wi, tmp
    with nogil:
        for p in range(nn):
            c = cos(0.5 * th[p])
            s = sin(0.5 * th[p])
            if c <= 0.0:
                out[p] = psi[0].real * psi[0].real + psi[0].imag * psi[0].imag
                continue
            if s <= 0.0:
                out[p] = psi[N].real * psi[N].real + psi[N].imag * psi[N].imag
                continue
            lc = log(c)
            ls = log(s)
            # conj amplitude phase exp(-i (N - i) phi), iterated from i = N downwards
            wr = cos(ph[p])
            wi = -sin(ph[p])
            cr = 1.0
            ci = 0.0
            re = 0.0
            im = 0.0
            i = N
            while i >= 0:
                mod = exp(lb[i] + i * lc + (N - i) * ls)
                re += mod * (cr * psi[i].real - ci * psi[i].imag)
                im += mod * (cr * psi[i].imag + ci * psi[i].real)
                tmp = cr * wr - ci * wi
                ci = cr * wi + ci * wr
                cr = tmp
                i -= 1
            out[p] = re * re + im * im
    return out_arr.reshape(shape)

