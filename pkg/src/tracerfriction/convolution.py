"""Volterra integro-differential engine with fast history summation.

Solves, on a uniform grid t_n = n h,

    y'(t) = alpha(t) * int_0^t y + beta * int_0^t kern(t - s) y(s) ds + f(t),

with trapezoidal product integration for both integrals and the trapezoidal
rule in time (second order, A-stable for the local part).  The convolution
history is accumulated by divide and conquer: after the left half of a block
is solved its contribution to the right half is added with one FFT
convolution, which gives O(N log^2 N) work.  Leaves of the recursion are
stepped by the compiled core when available.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from . import _accel

__all__ = ["solve_volterra_ide", "causal_convolution", "LEAF"]

LEAF = 128


def causal_convolution(kern: np.ndarray, y: np.ndarray, h: float) -> np.ndarray:
    """Trapezoidal h * sum'_{j=0..n} kern[n-j] y[j] for every n."""
    full = fftconvolve(kern, y)[: y.size] if y.size > 64 else np.convolve(kern, y)[: y.size]
    out = full - 0.5 * (kern[: y.size] * y[0] + kern[0] * y)
    return h * out


def solve_volterra_ide(
    kern: np.ndarray,
    h: float,
    n_steps: int,
    *,
    beta: float,
    y0: float = 1.0,
    alpha: np.ndarray | None = None,
    forcing: np.ndarray | None = None,
):
    """Return y on the grid 0..n_steps.

    ``kern``, ``alpha`` and ``forcing`` are sampled on the same grid and must
    have at least ``n_steps + 1`` entries.
    """
    n = int(n_steps) + 1
    kern = np.ascontiguousarray(kern[:n], dtype=float)
    if kern.size < n:
        raise ValueError("kernel samples do not cover the horizon")
    alpha = np.zeros(n) if alpha is None else np.ascontiguousarray(alpha[:n], dtype=float)
    forcing = np.zeros(n) if forcing is None else np.ascontiguousarray(forcing[:n], dtype=float)
    y = np.zeros(n)
    ytil = np.zeros(n)  # y with the j = 0 trapezoid half-weight folded in
    acc = np.zeros(n)   # history sums from already-solved blocks
    state = np.zeros(4)  # (Y_n, F_n, unused, unused)
    y[0] = y0
    ytil[0] = 0.5 * y0
    state[0] = 0.0
    state[1] = forcing[0]  # F_0: both integrals vanish at t = 0
    leaf = _accel.volterra_leaf

    def solve(lo: int, hi: int) -> None:
        if hi - lo <= LEAF:
            leaf(kern, alpha, forcing, y, ytil, acc, state, h, beta, lo, hi)
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        seg = ytil[lo:mid]
        conv = fftconvolve(seg, kern[: hi - lo]) if seg.size > 64 else np.convolve(seg, kern[: hi - lo])
        acc[mid:hi] += conv[mid - lo : hi - lo]
        solve(mid, hi)

    solve(0, n)
    return y
