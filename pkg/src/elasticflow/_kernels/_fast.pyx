# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: stencils, evolution right-hand side, cyclic solve.

Same API as ``_reference``; the banded factorization is delegated to
LAPACK's dgbsv through scipy's cython bindings.
"""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_lapack cimport dgbsv

BACKEND_NAME = "fast"


def periodic_derivatives(points, double h):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] f = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = f.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d1 = np.empty((n, 2))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d2 = np.empty((n, 2))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d3 = np.empty((n, 2))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d4 = np.empty((n, 2))
    cdef double c1 = 0.5 / h
    cdef double c2 = 1.0 / (h * h)
    cdef double c3 = 0.5 / (h * h * h)
    cdef double c4 = 1.0 / (h * h * h * h)
    cdef Py_ssize_t i, ip1, im1, ip2, im2, c
    cdef double fm2, fm1, f0, fp1, fp2
    for i in range(n):
        ip1 = i + 1 if i + 1 < n else i + 1 - n
        ip2 = i + 2 if i + 2 < n else i + 2 - n
        im1 = i - 1 if i - 1 >= 0 else i - 1 + n
        im2 = i - 2 if i - 2 >= 0 else i - 2 + n
        for c in range(2):
            fm2 = f[im2, c]
            fm1 = f[im1, c]
            f0 = f[i, c]
            fp1 = f[ip1, c]
            fp2 = f[ip2, c]
            d1[i, c] = (fp1 - fm1) * c1
            d2[i, c] = (fp1 - 2.0 * f0 + fm1) * c2
            d3[i, c] = (fp2 - 2.0 * fp1 + 2.0 * fm1 - fm2) * c3
            d4[i, c] = (fm2 - 4.0 * fm1 + 6.0 * f0 - 4.0 * fp1 + fp2) * c4
    return d1, d2, d3, d4


def curve_velocity(d1, d2, d3, d4, double mu):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g1 = np.ascontiguousarray(d1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g2 = np.ascontiguousarray(d2, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g3 = np.ascontiguousarray(d3, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g4 = np.ascontiguousarray(d4, dtype=np.float64)
    cdef Py_ssize_t n = g1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 2))
    cdef Py_ssize_t i, c
    cdef double q2, q4, q6, q8, a12, a13, a22, w2
    for i in range(n):
        q2 = g1[i, 0] * g1[i, 0] + g1[i, 1] * g1[i, 1]
        a12 = g2[i, 0] * g1[i, 0] + g2[i, 1] * g1[i, 1]
        a13 = g3[i, 0] * g1[i, 0] + g3[i, 1] * g1[i, 1]
        a22 = g2[i, 0] * g2[i, 0] + g2[i, 1] * g2[i, 1]
        q4 = q2 * q2
        q6 = q4 * q2
        q8 = q4 * q4
        w2 = 5.0 * a22 / q6 + 8.0 * a13 / q6 - 35.0 * a12 * a12 / q8 + mu / q2
        for c in range(2):
            out[i, c] = (-2.0 * g4[i, c] / q4
                         + 12.0 * g3[i, c] * a12 / q6
                         + g2[i, c] * w2)
    return out


def solve_cyclic_banded(diags, rhs):
    """Cyclic bandwidth-two direct solve; see the reference backend."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dg = np.ascontiguousarray(diags, dtype=np.float64)
    b_in = np.asarray(rhs, dtype=np.float64)
    if b_in.ndim == 1:
        b_in = b_in[:, None]
    cdef Py_ssize_t n = dg.shape[1]
    cdef Py_ssize_t m = b_in.shape[1]
    cdef Py_ssize_t ni = n - 2
    cdef int kl = 2, ku = 2

    cdef cnp.ndarray[cnp.float64_t, ndim=2] ab = np.zeros((7, ni), order="F")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] big = np.zeros((ni, m + 2), order="F")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bfull = np.ascontiguousarray(b_in)
    cdef Py_ssize_t i, j, o, a, col
    for i in range(ni):
        for col in range(m):
            big[i, col] = bfull[i, col]
    for o in range(-2, 3):
        for i in range(ni):
            j = i + o
            if j < 0:
                j += n
            elif j >= n:
                j -= n
            if j < ni:
                # LAPACK band storage: row kl+ku+i-j of column j
                ab[4 + i - j, j] = dg[o + 2, i]
            else:
                big[i, m + (j - ni)] = dg[o + 2, i]

    cdef cnp.ndarray[int, ndim=1] ipiv = np.zeros(ni, dtype=np.intc)
    cdef int info = 0, nn = <int> ni, nrhs = <int> (m + 2), ldab = 7, ldb = <int> ni
    dgbsv(&nn, &kl, &ku, &nrhs, &ab[0, 0], &ldab, &ipiv[0], &big[0, 0], &ldb, &info)
    if info != 0:
        return None

    # 2x2 Schur complement over the last two unknowns.
    cdef double s00 = 0.0, s01 = 0.0, s10 = 0.0, s11 = 0.0, val, det
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g = np.empty((2, m))
    for a in range(2):
        for col in range(m):
            g[a, col] = bfull[ni + a, col]
    for a in range(2):
        for o in range(-2, 3):
            val = dg[o + 2, ni + a]
            if val == 0.0:
                continue
            j = ni + a + o
            if j < 0:
                j += n
            elif j >= n:
                j -= n
            if j >= ni:
                if a == 0:
                    if j - ni == 0:
                        s00 += val
                    else:
                        s01 += val
                else:
                    if j - ni == 0:
                        s10 += val
                    else:
                        s11 += val
            else:
                if a == 0:
                    s00 -= val * big[j, m]
                    s01 -= val * big[j, m + 1]
                else:
                    s10 -= val * big[j, m]
                    s11 -= val * big[j, m + 1]
                for col in range(m):
                    g[a, col] -= val * big[j, col]
    det = s00 * s11 - s01 * s10
    if det == 0.0 or not (det == det):
        return None

    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.empty((n, m))
    cdef double xb0, xb1
    for col in range(m):
        xb0 = (s11 * g[0, col] - s01 * g[1, col]) / det
        xb1 = (-s10 * g[0, col] + s00 * g[1, col]) / det
        x[ni, col] = xb0
        x[ni + 1, col] = xb1
        for i in range(ni):
            x[i, col] = big[i, col] - big[i, m] * xb0 - big[i, m + 1] * xb1
    if not np.all(np.isfinite(x)):
        return None
    return x
