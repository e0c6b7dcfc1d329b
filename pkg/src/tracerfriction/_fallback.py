"""Pure-Python implementations of the hot loops.

These mirror ``_core.pyx`` statement by statement and are used when the
compiled extension is not available (or when forced through the
``TRACERFRICTION_PURE`` environment variable).
"""

from __future__ import annotations

import numpy as np


def volterra_leaf(kern, alpha, forcing, y, ytil, acc, state, h, beta, lo, hi):
    """Step the trapezoidal Volterra scheme over indices [lo, hi).

    ``acc[m]`` holds sum_{j < lo} kern[m-j] ytil[j]; the in-block part of the
    history is summed directly.  ``state`` carries (Y_n, F_n) across calls.
    """
    Y = state[0]
    F = state[1]
    half = 0.5 * h
    start = max(lo, 1)
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


def history_sums(A, C, dr, X, P, n, out_mem, out_b2):
    """Memory force at step n from the full history.

    For j = 0..n with trapezoid weights (1/2 at both ends), Y = X_j - X_n,
    r = |Y|, and (a, c) interpolated at lag n - j and radius r:

        out_mem = sum' (a P_j + c (Y.P_j) Y)
        out_b2  = sum' ((a - a0) P_j + c (Y.P_j) Y)

    with a0 = A[n - j, 0] the kernel at zero displacement.
    """
    nr = A.shape[1]
    mem = np.zeros(3)
    b2 = np.zeros(3)
    Xn = X[n]
    for j in range(n + 1):
        Y = X[j] - Xn
        r = float(np.sqrt(Y @ Y))
        a, c = _interp_r(A[n - j], C[n - j], r, dr, nr)
        w = 0.5 if (j == 0 or j == n) else 1.0
        yp = float(Y @ P[j])
        term_c = c * yp * Y
        mem += w * (a * P[j] + term_c)
        b2 += w * ((a - A[n - j, 0]) * P[j] + term_c)
    out_mem[:] = mem
    out_b2[:] = b2


def fixed_lag_sums(a_row, c_row, dr, X, P, n, X0, out_b1):
    """B1-type sum at step n: all history points use lag n and Y = X0 - X_j."""
    nr = a_row.shape[0]
    b1 = np.zeros(3)
    for j in range(n + 1):
        Y = X0 - X[j]
        r = float(np.sqrt(Y @ Y))
        a, c = _interp_r(a_row, c_row, r, dr, nr)
        w = 0.5 if (j == 0 or j == n) else 1.0
        b1 += w * ((a - a_row[0]) * P[j] + c * float(Y @ P[j]) * Y)
    out_b1[:] = b1


def _interp_r(arow, crow, r, dr, nr):
    s = r / dr
    i = int(s)
    if i < 1:
        i = 1
    if i > nr - 3:
        i = nr - 3
    x = s - i
    w0 = -x * (x - 1) * (x - 2) / 6
    w1 = (x + 1) * (x - 1) * (x - 2) / 2
    w2 = -(x + 1) * x * (x - 2) / 2
    w3 = (x + 1) * x * (x - 1) / 6
    a = w0 * arow[i - 1] + w1 * arow[i] + w2 * arow[i + 1] + w3 * arow[i + 2]
    c = w0 * crow[i - 1] + w1 * crow[i] + w2 * crow[i + 1] + w3 * crow[i + 2]
    return a, c
