# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loop for the node samplers.

Per proposal the sampler needs the row k(S, x) followed by a forward
triangular solve against the running Cholesky factor.  Fusing both into one
call removes the Python overhead that otherwise dominates the rejection
loop.  Kernel kinds are identified by small integer codes; see
kquad._accel.KIND_* for the mapping.
"""

import numpy as np

from libc.math cimport exp, floor, sqrt

cdef double PI = 3.14159265358979323846
cdef double SQRT5 = 2.23606797749978969641

# Coefficients of the Bernoulli-polynomial closed forms, one per smoothness.
cdef double C1 = 2.0 * PI * PI                             # s=1: +(2*pi)^2/2!
cdef double C2 = -2.0 * PI * PI * PI * PI / 3.0            # s=2: -(2*pi)^4/4!
cdef double C3 = 4.0 * PI * PI * PI * PI * PI * PI / 45.0  # s=3: +(2*pi)^6/6!


cdef inline double _sob(int s, double t) nogil:
    cdef double u = t - floor(t)
    cdef double u2 = u * u
    if s == 1:
        return 1.0 + C1 * (u2 - u + 1.0 / 6.0)
    elif s == 2:
        return 1.0 + C2 * (u2 * u2 - 2.0 * u2 * u + u2 - 1.0 / 30.0)
    else:
        return 1.0 + C3 * (u2 * u2 * u2 - 3.0 * u2 * u2 * u + 2.5 * u2 * u2
                           - 0.5 * u2 + 1.0 / 42.0)


cdef inline double _pair(int kind, double p1, int s, double[:, ::1] a,
                         Py_ssize_t j, double[:, ::1] b, Py_ssize_t p,
                         Py_ssize_t dim) nogil:
    """Kernel value k(a[j], b[p]) for the coded kernel family."""
    cdef Py_ssize_t l
    cdef double v, r, diff
    if kind == 0:
        return _sob(s, a[j, 0] - b[p, 0])
    elif kind == 1:
        v = 1.0
        for l in range(dim):
            v *= _sob(s, a[j, l] - b[p, l])
        return v
    elif kind == 2:
        r = 0.0
        for l in range(dim):
            diff = a[j, l] - b[p, l]
            r += diff * diff
        r = sqrt(r) / p1
        return (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * exp(-SQRT5 * r)
    else:
        r = 0.0
        for l in range(dim):
            diff = a[j, l] - b[p, l]
            r += diff * diff
        return exp(-0.5 * r / (p1 * p1))


def sobolev_value(int s, double t):
    """Periodic Sobolev kernel value at lag t, smoothness s in {1,2,3}."""
    return _sob(s, t)


def residual_probe(double[:, ::1] L, double[:, ::1] nodes, Py_ssize_t i,
                   double[:, ::1] x, int kind, double p1, int s, double kxx,
                   double[::1] cbuf):
    """Residual diagonal at the single point x (shape (1, dim)).

    Fills cbuf[:i] with the forward-substituted coefficients
    c = L^{-1} k(S, x) and returns d = kxx - ||c||^2.
    """
    cdef Py_ssize_t j, l
    cdef Py_ssize_t dim = nodes.shape[1]
    cdef double acc, nrm = 0.0
    with nogil:
        for j in range(i):
            acc = _pair(kind, p1, s, nodes, j, x, 0, dim)
            for l in range(j):
                acc -= L[j, l] * cbuf[l]
            acc /= L[j, j]
            cbuf[j] = acc
            nrm += acc * acc
    return kxx - nrm


def residual_diag_many(double[:, ::1] L, double[:, ::1] nodes, Py_ssize_t i,
                       double[:, ::1] pts, int kind, double p1, int s,
                       double[::1] kdiag, double[::1] out):
    """Residual diagonal at many probe points (grids, optimizer scans)."""
    cdef Py_ssize_t m = pts.shape[0]
    cdef Py_ssize_t dim = nodes.shape[1]
    cdef Py_ssize_t j, l, p
    cdef double acc, nrm
    buf = np.empty(max(i, 1), dtype=np.float64)
    cdef double[::1] c = buf
    with nogil:
        for p in range(m):
            nrm = 0.0
            for j in range(i):
                acc = _pair(kind, p1, s, nodes, j, pts, p, dim)
                for l in range(j):
                    acc -= L[j, l] * c[l]
                acc /= L[j, j]
                c[j] = acc
                nrm += acc * acc
            out[p] = kdiag[p] - nrm
