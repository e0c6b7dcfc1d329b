# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops in ``_fallback``.

Every function mirrors its pure-Python counterpart statement by statement,
including the summation order, so both backends agree to rounding.
"""

from libc.math cimport sqrt


def volterra_leaf(const double[::1] kern, const double[::1] alpha, const double[::1] forcing,
                  double[::1] y, double[::1] ytil, const double[::1] acc, double[::1] state,
                  double h, double beta, Py_ssize_t lo, Py_ssize_t hi):
    """Step the trapezoidal Volterra scheme over indices [lo, hi)."""
    cdef double Y = state[0]
    cdef double F = state[1]
    cdef double half = 0.5 * h
    cdef double S, yp, am, rhs, denom, ym
    cdef Py_ssize_t m, j
    cdef Py_ssize_t start = lo if lo > 1 else 1
    for m in range(start, hi):
        S = acc[m]
        for j in range(lo, m):
            S += kern[m - j] * ytil[j]
        yp = y[m - 1]
        am = alpha[m]
        rhs = yp + half * (F + am * (Y + half * yp) + beta * h * S + forcing[m])
        denom = 1.0 - half * (am * half + beta * half * kern[0])
        ym = rhs / denom
        y[m] = ym
        ytil[m] = ym
        Y = Y + half * (yp + ym)
        F = am * Y + beta * h * (S + 0.5 * kern[0] * ym) + forcing[m]
    state[0] = Y
    state[1] = F


cdef inline void _interp_r(const double[:] arow, const double[:] crow, double r, double dr,
                           Py_ssize_t nr, double* a, double* c) noexcept nogil:
    cdef double s = r / dr
    cdef Py_ssize_t i = <Py_ssize_t>s
    if i < 1:
        i = 1
    if i > nr - 3:
        i = nr - 3
    cdef double x = s - i
    cdef double w0 = -x * (x - 1) * (x - 2) / 6
    cdef double w1 = (x + 1) * (x - 1) * (x - 2) / 2
    cdef double w2 = -(x + 1) * x * (x - 2) / 2
    cdef double w3 = (x + 1) * x * (x - 1) / 6
    a[0] = w0 * arow[i - 1] + w1 * arow[i] + w2 * arow[i + 1] + w3 * arow[i + 2]
    c[0] = w0 * crow[i - 1] + w1 * crow[i] + w2 * crow[i + 1] + w3 * crow[i + 2]


def history_sums(const double[:, ::1] A, const double[:, ::1] C, double dr,
                 const double[:, ::1] X, const double[:, ::1] P, Py_ssize_t n,
                 double[::1] out_mem, double[::1] out_b2):
    """Memory force at step n from the full history (see ``_fallback``)."""
    cdef Py_ssize_t nr = A.shape[1]
    cdef double m0 = 0.0, m1 = 0.0, m2 = 0.0
    cdef double b0 = 0.0, b1 = 0.0, b2 = 0.0
    cdef double y0, y1, y2, r, a, c, w, yp, tc0, tc1, tc2, a0
    cdef Py_ssize_t j
    cdef double xn0 = X[n, 0], xn1 = X[n, 1], xn2 = X[n, 2]
    with nogil:
        for j in range(n + 1):
            y0 = X[j, 0] - xn0
            y1 = X[j, 1] - xn1
            y2 = X[j, 2] - xn2
            r = sqrt(y0 * y0 + y1 * y1 + y2 * y2)
            _interp_r(A[n - j], C[n - j], r, dr, nr, &a, &c)
            w = 0.5 if (j == 0 or j == n) else 1.0
            yp = y0 * P[j, 0] + y1 * P[j, 1] + y2 * P[j, 2]
            tc0 = c * yp * y0
            tc1 = c * yp * y1
            tc2 = c * yp * y2
            m0 += w * (a * P[j, 0] + tc0)
            m1 += w * (a * P[j, 1] + tc1)
            m2 += w * (a * P[j, 2] + tc2)
            a0 = a - A[n - j, 0]
            b0 += w * (a0 * P[j, 0] + tc0)
            b1 += w * (a0 * P[j, 1] + tc1)
            b2 += w * (a0 * P[j, 2] + tc2)
    out_mem[0] = m0
    out_mem[1] = m1
    out_mem[2] = m2
    out_b2[0] = b0
    out_b2[1] = b1
    out_b2[2] = b2


def fixed_lag_sums(const double[::1] a_row, const double[::1] c_row, double dr,
                   const double[:, ::1] X, const double[:, ::1] P, Py_ssize_t n,
                   const double[::1] X0, double[::1] out_b1):
    """B1-type sum at step n with lag n and Y = X0 - X_j (see ``_fallback``)."""
    cdef Py_ssize_t nr = a_row.shape[0]
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0
    cdef double y0, y1, y2, r, a, c, w, yp, da
    cdef Py_ssize_t j
    with nogil:
        for j in range(n + 1):
            y0 = X0[0] - X[j, 0]
            y1 = X0[1] - X[j, 1]
            y2 = X0[2] - X[j, 2]
            r = sqrt(y0 * y0 + y1 * y1 + y2 * y2)
            _interp_r(a_row, c_row, r, dr, nr, &a, &c)
            w = 0.5 if (j == 0 or j == n) else 1.0
            yp = y0 * P[j, 0] + y1 * P[j, 1] + y2 * P[j, 2]
            da = a - a_row[0]
            s0 += w * (da * P[j, 0] + c * yp * y0)
            s1 += w * (da * P[j, 1] + c * yp * y1)
            s2 += w * (da * P[j, 2] + c * yp * y2)
    out_b1[0] = s0
    out_b1[1] = s1
    out_b1[2] = s2
