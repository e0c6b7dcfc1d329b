"""The Wiener-Hopf propagator K(t), computed two independent ways.

* ``solve_K_volterra`` integrates  K' = -Z int_0^t M(t-s) K(s) ds,  K(0) = 1,
  with the trapezoidal product-integration engine, at steps h and h/2, and
  returns the Richardson-extrapolated samples on the h grid.
* ``invert_K_fourier`` evaluates the inverse one-sided transform of
  -1/(ik + Z G(k+i0)) through ``quad_core.fourier_inversion``.

For large t both are compared with  Z K(t) ~ (1/4) pi^{-5/2} t^{-1/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from . import quad_core as qc
from .convolution import causal_convolution, solve_volterra_ide
from .kernels import CouplingConstants, RadialPotential, eval_G, tabulate_correlations

__all__ = [
    "MemoryKernel",
    "K_TAIL",
    "solve_K_volterra",
    "invert_K_fourier",
    "conv_I",
    "spectrum_table",
    "correlation_grid",
]

#: Z K(t) t^{1/2} -> K_TAIL
K_TAIL = 0.25 * math.pi**-2.5


@dataclass
class MemoryKernel:
    """Samples of K on a uniform grid plus the large-t law.

    Beyond the grid, Z K(t) = K_TAIL t^{-1/2} + C_K t^{-1}, with C_K fitted on
    the last decade of samples.
    """

    t: np.ndarray
    K: np.ndarray
    step: float
    Z: float
    method: str = "volterra"
    C_K: float = float("nan")
    error_estimate: float = float("nan")
    M: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.Z > 0 and self.t[-1] >= 100:
            sel = self.t >= 0.1 * self.t[-1]
            resid = self.Z * self.K[sel] - K_TAIL * self.t[sel] ** -0.5
            basis = 1.0 / self.t[sel]
            self.C_K = float(np.dot(resid, basis) / np.dot(basis, basis))

    @property
    def c_half(self) -> float:
        """Amplitude of K itself: K ~ c_half t^{-1/2}, c_half = 1/(4 Z pi^{5/2})."""
        return K_TAIL / self.Z

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.empty_like(t)
        inside = t <= self.horizon
        if np.any(t < 0):
            raise ValueError("K is evaluated for t >= 0 only")
        if np.any(inside):
            s = t[inside] / self.step
            i = np.clip(np.floor(s).astype(int), 1, self.t.size - 3)
            x = s - i
            k = self.K
            out[inside] = (
                -x * (x - 1) * (x - 2) / 6 * k[i - 1]
                + (x + 1) * (x - 1) * (x - 2) / 2 * k[i]
                - (x + 1) * x * (x - 2) / 2 * k[i + 1]
                + (x + 1) * x * (x - 1) / 6 * k[i + 2]
            )
        if np.any(~inside):
            if self.Z == 0:
                out[~inside] = 1.0
            else:
                tt = t[~inside]
                out[~inside] = (K_TAIL * tt**-0.5 + self.C_K / tt) / self.Z
        return float(out[0]) if scalar else out

    def invariant_report(self) -> dict:
        rep = {
            "K0": float(self.K[0]),
            "max_abs_K": float(np.max(np.abs(self.K))),
            "bound_ok": bool(np.max(np.abs(self.K)) <= 1.05),
        }
        if self.Z > 0 and self.horizon >= 1e3:
            sel = self.t >= 1e3
            dev = np.abs(self.Z * self.K[sel] * np.sqrt(self.t[sel]) - K_TAIL) / K_TAIL
            rep["tail_max_rel_dev"] = float(dev.max())
            rep["tail_ok"] = bool(dev.max() <= 0.02)
        return rep

    def to_rows(self, every: int = 1):
        idx = np.arange(0, self.t.size, every)
        t = self.t[idx]
        with np.errstate(invalid="ignore"):
            tail = self.Z * self.K[idx] * np.sqrt(t)
        return np.column_stack([t, self.K[idx], tail])


def correlation_grid(pot: RadialPotential, step: float, n_steps: int) -> np.ndarray:
    """M(n h) for n = 0..n_steps from the cached correlation table."""
    t_max = step * n_steps
    table_max = max(1.0e4, t_max)
    tables = tabulate_correlations(pot, t_max=table_max)
    return tables["Mc"](step * np.arange(n_steps + 1)).real


def _volterra_raw(M: np.ndarray, Z: float, step: float, n_steps: int) -> np.ndarray:
    return solve_volterra_ide(M, step, n_steps, beta=-Z, y0=1.0)


def solve_K_volterra(
    pot: RadialPotential,
    constants: CouplingConstants,
    horizon: float,
    step: float = 0.02,
    *,
    extrapolate: bool = True,
) -> MemoryKernel:
    """K on [0, horizon] by product integration; see module docstring."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not 0 < step <= 0.05:
        raise ValueError("step must lie in (0, 0.05] so that M is resolved")
    n = int(round(horizon / step))
    Z = constants.Z
    M_fine = correlation_grid(pot, 0.5 * step, 2 * n)
    fine = _volterra_raw(M_fine, Z, 0.5 * step, 2 * n)[::2]
    M = M_fine[::2]
    if extrapolate:
        coarse = _volterra_raw(M, Z, step, n)
        K = (4.0 * fine - coarse) / 3.0
        # the difference estimates the error of the unextrapolated fine run;
        # the extrapolated error is of higher order
        err = float(np.max(np.abs(fine - coarse))) / 3.0
    else:
        K = fine
        err = float("nan")
    t = step * np.arange(n + 1)
    K[0] = 1.0
    return MemoryKernel(t=t, K=K, step=step, Z=Z, method="volterra", error_estimate=err, M=M)


# ---------------------------------------------------------------------------
# Fourier route

_SPECTRUM_CACHE: dict = {}


class _GTable:
    """Cubic spline of q(rho) = G(rho^2)/rho, analytic in rho = sqrt|k|."""

    def __init__(self, pot: RadialPotential, k_max: float, n: int = 1600):
        rho = np.linspace(1e-3, math.sqrt(k_max) * 1.02, n)
        spec = qc.QuadratureSpec(target_error=1e-10)
        q = np.array([eval_G(pot, r * r, spec) / r for r in rho])
        self.k_max = k_max
        self.spline_re = CubicSpline(rho, q.real)
        self.spline_im = CubicSpline(rho, q.imag)

    def G(self, k):
        k = np.asarray(k, dtype=float)
        rho = np.sqrt(np.abs(k))
        g = rho * (self.spline_re(rho) + 1j * self.spline_im(rho))
        return np.where(k >= 0, g, np.conj(g))


def spectrum_table(pot: RadialPotential, k_max: float = 16.0) -> _GTable:
    key = (pot.key, k_max)
    if key not in _SPECTRUM_CACHE:
        _SPECTRUM_CACHE[key] = _GTable(pot, k_max)
    return _SPECTRUM_CACHE[key]


def invert_K_fourier(
    pot: RadialPotential,
    constants: CouplingConstants,
    t: float,
    spec: qc.QuadratureSpec | None = None,
    *,
    full_output: bool = False,
):
    """K(t) from the inverse transform of -1/(ik + Z G(k+i0)).

    For t > 0 the cosine form is used; for t <= 0 the full exponential form
    is evaluated, which must return 0 (causality).
    """
    Z = constants.Z
    if Z == 0:
        raise ValueError("the Fourier route needs Z > 0 (the spectrum is 1/(ik))")
    table = spectrum_table(pot)
    spec = spec or qc.QuadratureSpec(target_error=1e-7, truncation=table.k_max)

    def spectrum(k):
        return 1.0 / (1j * k + Z * table.G(k))

    if t > 0:
        return qc.fourier_inversion(spectrum, t, spec, form="cos", full_output=full_output)
    return qc.fourier_inversion(spectrum, t, spec, form="exp", imag_tail=-1.0, full_output=full_output)


# ---------------------------------------------------------------------------


def conv_I(kernel: MemoryKernel, pot: RadialPotential, constants: CouplingConstants, t=None):
    """I(t) = int_0^t K(t-s) Z M(s) ds on the kernel grid (or at given t).

    Computed by trapezoidal convolution of the stored K and M samples.
    """
    M = kernel.M if kernel.M is not None else correlation_grid(pot, kernel.step, kernel.t.size - 1)
    I = constants.Z * causal_convolution(M, kernel.K, kernel.step)
    if t is None:
        return kernel.t, I
    t = np.asarray(t, dtype=float)
    if np.any(t > kernel.horizon) or np.any(t < 0):
        raise ValueError("t outside the kernel range")
    return np.interp(t, kernel.t, I)
