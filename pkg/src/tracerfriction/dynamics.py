"""Effective particle dynamics with memory.

The tracer obeys

    Pdot_t = B0(t) + 2 nu a(t, |X0 - X_t|) (X0 - X_t)
             + 2 nu int_0^t [a(t-s, r) P_s + c(t-s, r) (Y.P_s) Y] ds,
    Xdot_t = P_t,            Y = X_s - X_t,  r = |Y|,

where (a, c) are the real parts of the displacement kernels of
``kernels.DisplacementTable`` (so that grad Phi = a Y and Hess Phi = a I + c YY^T)
and B0 is the force exerted by the freely dispersing initial field.  Using
a(t, 0) = -M(t)/3 the same law splits as

    Pdot = L(P) + B0 + B1 + B2,
    L(P)(t) = Z M(t) Q(t) - Z int_0^t M(t-s) P_s ds,       Q(t) = X_t - X0,

with B1 the displacement correction of the boundary term and B2 that of the
memory integral.  Dropping B0, B1, B2 leaves the scalar linearized equation
solved by ``solve_linearized``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _accel
from . import quad_core as qc
from .convolution import causal_convolution, solve_volterra_ide
from .kernels import (
    CouplingConstants,
    DisplacementTable,
    RadialPotential,
    sph_g1,
)
from .memory_kernel import MemoryKernel, correlation_grid, solve_K_volterra

__all__ = [
    "ParticleState",
    "FieldInit",
    "Trajectory",
    "LinearTrajectory",
    "NonlinearConfig",
    "DecayFit",
    "XInfinity",
    "FixedPointReport",
    "BlowUpError",
    "ContractionError",
    "solve_linearized",
    "b0_force",
    "b0_force_radial",
    "forcing_B",
    "solve_nonlinear",
    "fixed_point_solve",
    "default_T",
    "fixed_point_refinement",
    "fit_decay_exponent",
    "x_infinity",
    "displacement_table",
]

#: largest number of steps any solver in this module accepts
MAX_STEPS = 100_000


class BlowUpError(RuntimeError):
    """The momentum left the small-data regime."""


class ContractionError(RuntimeError):
    """The fixed-point iteration did not contract."""

    def __init__(self, message: str, ratio: float):
        super().__init__(message)
        self.ratio = ratio


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class ParticleState:
    t: float
    X: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class FieldInit:
    """Gaussian initial field  beta0(x) = A exp(-|x - c|^2 / (2 w^2))."""

    A: float = 1e-2
    w: float = 1.0
    c: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.w > 0:
            raise ValueError("width w must be positive")
        if len(self.c) != 3:
            raise ValueError("center c must be a 3-vector")
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))

    @property
    def center(self) -> np.ndarray:
        return np.array(self.c, dtype=float)

    def beta_hat(self, k: np.ndarray, kvec: Optional[np.ndarray] = None):
        """Transform A w^3 exp(-w^2 k^2 / 2) exp(i k.c) at |k| (and direction)."""
        k = np.asarray(k, dtype=float)
        out = self.A * self.w**3 * np.exp(-0.5 * (self.w * k) ** 2)
        if kvec is not None:
            out = out * np.exp(1j * (np.asarray(kvec) @ self.center))
        return out

    def l2_norm(self) -> float:
        """Closed form of ||beta0||_2 = |A| (pi w^2)^{3/4}."""
        return abs(self.A) * (math.pi * self.w**2) ** 0.75

    def moment_norm(self, power: int = 4) -> float:
        """||<x>^power beta0||_2 with <x> = (1 + |x|^2)^{1/2}.

        The integrand is a polynomial of degree 2*power times a Gaussian, so
        a tensor Gauss-Hermite rule with power + 1 nodes per axis is exact.
        """
        y, wy = np.polynomial.hermite.hermgauss(power + 1)
        g = np.stack(np.meshgrid(y, y, y, indexing="ij"), axis=-1).reshape(-1, 3)
        wg = (wy[:, None, None] * wy[None, :, None] * wy[None, None, :]).ravel()
        x = self.center + self.w * g
        vals = (1.0 + np.sum(x * x, axis=1)) ** power
        return abs(self.A) * math.sqrt(self.w**3 * float(np.dot(wg, vals)))

    def is_small(self, eps0: float) -> bool:
        return self.moment_norm() <= eps0


@dataclass
class LinearTrajectory:
    t: np.ndarray
    q: np.ndarray
    step: float

    def to_rows(self, every: int = 1):
        return np.column_stack([self.t[::every], self.q[::every]])


@dataclass
class Trajectory:
    """Particle path with the per-step forcing decomposition.

    ``B1_quad`` holds B1 recomputed from its history-integral form every
    ``meta['diag_every']`` steps (NaN elsewhere); ``B1`` itself is the exact
    pointwise difference T1 - Z M Q.
    """

    t: np.ndarray
    X: np.ndarray
    P: np.ndarray
    Pdot: np.ndarray
    L: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    B1_quad: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def step(self) -> float:
        return float(self.meta["step"])

    @property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.P, axis=1)

    def state(self, n: int) -> ParticleState:
        return ParticleState(float(self.t[n]), self.X[n].copy(), self.P[n].copy())

    def decomposition_residual(self) -> float:
        """max |Pdot - (L + B0 + B1 + B2)|."""
        return float(np.max(np.abs(self.Pdot - (self.L + self.B0 + self.B1 + self.B2))))

    def b1_quadrature_gap(self) -> float:
        sel = ~np.isnan(self.B1_quad[:, 0])
        if not np.any(sel):
            return float("nan")
        return float(np.max(np.abs(self.B1_quad[sel] - self.B1[sel])))

    def kinematic_residual(self) -> float:
        """max_n |X_{n+1} - X_n - (h/2)(P_n + P_{n+1})|."""
        h = self.step
        d = np.diff(self.X, axis=0) - 0.5 * h * (self.P[1:] + self.P[:-1])
        return float(np.max(np.abs(d))) if d.size else 0.0

    COLUMNS = (
        "t", "X1", "X2", "X3", "P1", "P2", "P3", "absP",
        "B0_1", "B0_2", "B0_3", "B1_1", "B1_2", "B1_3",
        "B2_1", "B2_2", "B2_3", "L1", "L2", "L3",
    )

    def to_rows(self, every: int = 1):
        s = slice(None, None, every)
        return np.column_stack(
            [self.t[s], self.X[s], self.P[s], self.speed[s], self.B0[s], self.B1[s], self.B2[s], self.L[s]]
        )


@dataclass(frozen=True)
class NonlinearConfig:
    """Inputs of ``solve_nonlinear``.

    ``eps0`` switches on the small-data check: both |P0| and the weighted
    moment norm of beta0 must not exceed it.
    """

    pot: RadialPotential = field(default_factory=RadialPotential)
    constants: CouplingConstants = field(default_factory=CouplingConstants)
    P0: tuple = (0.0, 0.0, 1e-2)
    X0: tuple = (0.0, 0.0, 0.0)
    field_init: FieldInit = field(default_factory=FieldInit)
    horizon: float = 500.0
    step: float = 0.02
    r_max: float = 5.0
    diag_every: int = 50
    blowup_factor: float = 10.0
    eps0: Optional[float] = None

    def __post_init__(self) -> None:
        if len(self.P0) != 3 or len(self.X0) != 3:
            raise ValueError("P0 and X0 must be 3-vectors")
        object.__setattr__(self, "P0", tuple(float(v) for v in self.P0))
        object.__setattr__(self, "X0", tuple(float(v) for v in self.X0))
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not 0 < self.step <= 0.05:
            raise ValueError("step must lie in (0, 0.05]")
        if self.horizon / self.step > MAX_STEPS:
            raise ValueError(f"horizon/step = {self.horizon / self.step:.0f} exceeds the cost guard {MAX_STEPS}")
        if self.diag_every < 1:
            raise ValueError("diag_every must be >= 1")
        if self.eps0 is not None:
            p0 = float(np.linalg.norm(self.P0))
            m = self.field_init.moment_norm()
            if p0 > self.eps0 or m > self.eps0:
                raise ValueError(
                    f"data outside the small-data bound eps0={self.eps0}: |P0|={p0:.3g}, "
                    f"||<x>^4 beta0||_2={m:.3g}"
                )

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


# ---------------------------------------------------------------------------
# linearized equation


def solve_linearized(
    constants: CouplingConstants,
    pot: RadialPotential,
    horizon: float,
    step: float = 0.01,
    kernelM: Optional[np.ndarray] = None,
) -> LinearTrajectory:
    """q' = Z M(t) int_0^t q - Z int_0^t M(t-s) q(s) ds, q(0) = 1.

    ``kernelM`` may supply M on the grid (length >= horizon/step + 1);
    otherwise it is read from the correlation table.
    """
    if not horizon > 0 or not step > 0:
        raise ValueError("horizon and step must be positive")
    n = int(round(horizon / step))
    if n > MAX_STEPS:
        raise ValueError(f"horizon/step = {n} exceeds the cost guard {MAX_STEPS}")
    Z = constants.Z
    M = correlation_grid(pot, step, n) if kernelM is None else np.asarray(kernelM, dtype=float)
    if M.size < n + 1:
        raise ValueError("kernelM does not cover the horizon")
    q = solve_volterra_ide(M, step, n, beta=-Z, alpha=Z * M[: n + 1], y0=1.0)
    return LinearTrajectory(t=step * np.arange(n + 1), q=q, step=step)


# ---------------------------------------------------------------------------
# forcing


def b0_force(pot: RadialPotential, constants: CouplingConstants, init: FieldInit, t, X) -> np.ndarray:
    """B0 = nu Re <grad W^{X}, e^{i Delta t/2} beta0> for the Gaussian profile.

    Closed form: with alpha = sigma^2 + w^2 + i t and d = c - X,
    B0 = nu A w^3 Re[-(d/alpha) (2 pi/alpha)^{3/2} exp(-d.d/(2 alpha))].
    ``t`` may be an array with ``X`` of shape (len(t), 3).
    """
    if pot.kind != "gaussian":
        if np.ndim(t) == 0:
            return b0_force_radial(pot, constants, init, float(t), X)
        return np.array([b0_force_radial(pot, constants, init, float(ti), xi) for ti, xi in zip(t, X)])
    t = np.asarray(t, dtype=float)
    d = init.center - np.asarray(X, dtype=float)
    alpha = pot.sigma**2 + init.w**2 + 1j * t
    dd = np.sum(d * d, axis=-1)
    fac = -(2 * math.pi / alpha) ** 1.5 / alpha * np.exp(-0.5 * dd / alpha)
    return constants.nu * init.A * init.w**3 * np.real(fac[..., None] * d)


def b0_force_radial(
    pot: RadialPotential,
    constants: CouplingConstants,
    init: FieldInit,
    t: float,
    X,
    spec: qc.QuadratureSpec = qc.DEFAULT_SPEC,
) -> np.ndarray:
    """B0 for any radial profile: -4 pi d nu A w^3 Re int k^4 W^ e^{-(w^2 + i t) k^2/2} g1(k r) dk."""
    d = init.center - np.asarray(X, dtype=float)
    r = float(np.linalg.norm(d))
    if init.A == 0.0 or constants.nu == 0.0:
        return np.zeros(3)

    def weight(k):
        return pot.w_hat(k) * np.exp(-0.5 * (init.w * k) ** 2) * sph_g1(k * r)

    val = qc.gauss_oscillatory(weight, 0.5j * t, 4, spec)
    return -4 * math.pi * constants.nu * init.A * init.w**3 * val.real * d


_TABLE_CACHE: dict = {}


def displacement_table(pot: RadialPotential, horizon: float, r_max: float = 5.0) -> DisplacementTable:
    """Cached displacement-kernel table covering lags up to ``horizon``."""
    key = (pot.key, float(horizon), float(r_max))
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = DisplacementTable(pot, t_max=horizon, r_max=r_max)
    return _TABLE_CACHE[key]


def _lag_tables(pot: RadialPotential, horizon: float, step: float, n: int, r_max: float):
    """Lag tables with column 0 replaced by the exact -M/3.

    Whole rows are shifted, so that a - a(., 0) keeps its table value while
    the zero-displacement part matches the correlation table used by the
    linearized equation.
    """
    table = displacement_table(pot, horizon, r_max)
    A, C = table.lag_tables(step, n)
    exact0 = -correlation_grid(pot, step, n) / 3.0
    A += (exact0 - A[:, 0])[:, None]
    return A, np.ascontiguousarray(C), table.dr, table


def forcing_B(
    pot: RadialPotential,
    constants: CouplingConstants,
    X: np.ndarray,
    P: np.ndarray,
    init: FieldInit,
    n: int,
    step: float,
    *,
    r_max: float = 5.0,
    tables=None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(B0, B1, B2) at t_n from a history X[0..n], P[0..n] on the step grid.

    B1 is evaluated from its history-integral form
    -2 nu int [Hess Phi(t, X0 - X_s) - Hess Phi(t, 0)] P_s ds and B2 from
    2 nu int [Hess Phi(t - s, X_s - X_t) - Hess Phi(t - s, 0)] P_s ds.
    """
    X = np.ascontiguousarray(X, dtype=float)
    P = np.ascontiguousarray(P, dtype=float)
    if X.shape[0] <= n or P.shape[0] <= n:
        raise ValueError("history does not cover [0, t]")
    t = n * step
    if tables is None:
        horizon = max(t, step * 4)
        tables = _lag_tables(pot, horizon, step, max(n, 4), r_max)
    A, C, dr, _ = tables
    nu = constants.nu
    B0 = b0_force(pot, constants, init, t, X[n])
    mem = np.zeros(3)
    b2 = np.zeros(3)
    b1 = np.zeros(3)
    if n > 0:
        _accel.history_sums(A, C, dr, X, P, n, mem, b2)
        _accel.fixed_lag_sums(A[n], C[n], dr, X, P, n, np.ascontiguousarray(X[0]), b1)
    return B0, -2 * nu * step * b1, 2 * nu * step * b2


# ---------------------------------------------------------------------------
# nonlinear solve


def _check_range(lo: np.ndarray, hi: np.ndarray, r_max: float, t: float) -> None:
    diam = float(np.linalg.norm(hi - lo))
    if diam > r_max:
        raise ValueError(
            f"displacement range {diam:.3g} at t={t:.4g} exceeds the kernel-table radius {r_max}"
        )


def solve_nonlinear(config: NonlinearConfig, *, tables=None) -> Trajectory:
    """Integrate the effective memory law with predictor-corrector steps.

    Each step uses a second-order Adams-Bashforth predictor for P (Euler on
    the first step) to place X_{n+1}, then solves the trapezoidal corrector
    for P_{n+1}, which is linear in P_{n+1} because only the end-point term
    of the memory sum contains it.
    """
    cfg = config
    h = cfg.step
    N = cfg.n_steps
    nu = cfg.constants.nu
    X0 = np.array(cfg.X0)
    P0 = np.array(cfg.P0)
    t = h * np.arange(N + 1)
    X = np.zeros((N + 1, 3))
    P = np.zeros((N + 1, 3))
    Fd = np.zeros((N + 1, 3))
    Lt = np.zeros((N + 1, 3))
    B0 = np.zeros((N + 1, 3))
    B1 = np.zeros((N + 1, 3))
    B2 = np.zeros((N + 1, 3))
    B1q = np.full((N + 1, 3), np.nan)
    X[0] = X0
    P[0] = P0
    meta = {
        "method": "AB2 predictor + trapezoidal corrector",
        "step": h,
        "horizon": N * h,
        "n_steps": N,
        "diag_every": cfg.diag_every,
        "backend": _accel.BACKEND,
    }

    if nu == 0.0:
        X[:] = X0 + t[:, None] * P0
        P[:] = P0
        meta["ballistic"] = True
        B1q[:] = 0.0
        return Trajectory(t, X, P, Fd, Lt, B0, B1, B2, B1q, meta)

    if tables is None:
        tables = _lag_tables(cfg.pot, N * h, h, N, cfg.r_max)
    A, C, dr, table = tables
    if A.shape[0] < N + 1:
        raise ValueError("lag tables do not cover the horizon")
    meta["table_error"] = float(table.max_error)
    a00 = A[0, 0]
    B0[0] = b0_force(cfg.pot, cfg.constants, cfg.field_init, 0.0, X0)
    Fd[0] = B0[0]
    Lt[0] = 0.0
    B1q[0] = 0.0
    lo = X0.copy()
    hi = X0.copy()
    ref = float(np.linalg.norm(P0))
    impulse = 0.0
    mem = np.zeros(3)
    b2 = np.zeros(3)
    b1 = np.zeros(3)
    denom = 1.0 - 0.5 * h * 2 * nu * h * 0.5 * a00
    for n in range(N):
        m = n + 1
        if n == 0:
            Ppred = P[0] + h * Fd[0]
        else:
            Ppred = P[n] + h * (1.5 * Fd[n] - 0.5 * Fd[n - 1])
        X[m] = X[n] + 0.5 * h * (P[n] + Ppred)
        lo = np.minimum(lo, X[m])
        hi = np.maximum(hi, X[m])
        _check_range(lo, hi, cfg.r_max, t[m])
        P[m] = 0.0
        _accel.history_sums(A, C, dr, X, P, m, mem, b2)
        d0 = X0 - X[m]
        r0 = float(math.sqrt(d0 @ d0))
        a_r = _interp_row(A[m], r0, dr)
        T1 = 2 * nu * a_r * d0
        B0[m] = b0_force(cfg.pot, cfg.constants, cfg.field_init, t[m], X[m])
        rest = B0[m] + T1 + 2 * nu * h * mem
        P[m] = (P[n] + 0.5 * h * (Fd[n] + rest)) / denom
        Fd[m] = rest + 2 * nu * h * 0.5 * a00 * P[m]
        # decomposition
        ZMQ = 2 * nu * A[m, 0] * d0
        B1[m] = T1 - ZMQ
        B2[m] = 2 * nu * h * b2
        Lt[m] = ZMQ + 2 * nu * h * (mem - b2 + 0.5 * a00 * P[m])
        if m % cfg.diag_every == 0 or m == N:
            _accel.fixed_lag_sums(A[m], C[m], dr, X, P, m, X0, b1)
            B1q[m] = -2 * nu * h * b1
        impulse += h * float(np.linalg.norm(B0[m]))
        ref = max(ref, impulse)
        speed = float(np.linalg.norm(P[m]))
        if not math.isfinite(speed) or (ref > 0 and speed > cfg.blowup_factor * ref):
            raise BlowUpError(
                f"|P|={speed:.3g} at t={t[m]:.4g} exceeds {cfg.blowup_factor}x the data scale "
                f"{ref:.3g}; large data lie outside the small-data regime"
            )
    meta["max_displacement"] = float(np.linalg.norm(hi - lo))
    return Trajectory(t, X, P, Fd, Lt, B0, B1, B2, B1q, meta)


def _interp_row(row: np.ndarray, r: float, dr: float) -> float:
    nr = row.size
    s = r / dr
    i = min(max(int(s), 1), nr - 3)
    x = s - i
    w = (
        -x * (x - 1) * (x - 2) / 6,
        (x + 1) * (x - 1) * (x - 2) / 2,
        -(x + 1) * x * (x - 2) / 2,
        (x + 1) * x * (x - 1) / 6,
    )
    return float(w[0] * row[i - 1] + w[1] * row[i] + w[2] * row[i + 1] + w[3] * row[i + 2])


# ---------------------------------------------------------------------------
# fixed-point reformulation


@dataclass
class FixedPointReport:
    trajectory: Trajectory
    T: float
    delta: float
    iterations: int
    ratios: list
    update_norms: list
    outer_updates: list
    agreement: float = float("nan")

    @property
    def contracts(self) -> bool:
        return bool(self.ratios) and max(self.ratios) < 1.0


def default_T(kernel: MemoryKernel, threshold: float = 0.2, minimum: float = 0.0) -> float:
    """Smallest grid time after which |K| stays below ``threshold``."""
    above = np.nonzero(np.abs(kernel.K) >= threshold)[0]
    idx = 0 if above.size == 0 else int(above[-1]) + 1
    if idx >= kernel.t.size:
        raise ValueError("|K| does not drop below the threshold on the kernel grid")
    return max(float(kernel.t[idx]), minimum)


def _cumtrapz(y: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = 0.5 * h * np.cumsum(y[1:] + y[:-1], axis=0)
    return out


def _conv3(kern: np.ndarray, y: np.ndarray, h: float) -> np.ndarray:
    return np.column_stack([causal_convolution(kern, y[:, i], h) for i in range(y.shape[1])])


def _forcing_path(cfg: NonlinearConfig, A, C, dr, X, P, start: int) -> np.ndarray:
    """F = B0 + B1 + B2 for n >= start along a given path (O(N^2))."""
    N = X.shape[0] - 1
    nu = cfg.constants.nu
    h = cfg.step
    X0 = X[0]
    F = np.zeros_like(X)
    t = h * np.arange(N + 1)
    F[start:] = b0_force(cfg.pot, cfg.constants, cfg.field_init, t[start:], X[start:])
    mem = np.zeros(3)
    b2 = np.zeros(3)
    for n in range(max(start, 1), N + 1):
        _accel.history_sums(A, C, dr, X, P, n, mem, b2)
        d0 = X0 - X[n]
        a_r = _interp_row(A[n], float(math.sqrt(d0 @ d0)), dr)
        F[n] += 2 * nu * (a_r - A[n, 0]) * d0 + 2 * nu * h * b2
    return F


def fixed_point_solve(
    config: NonlinearConfig,
    T: Optional[float] = None,
    delta: float = 0.3,
    *,
    direct: Optional[Trajectory] = None,
    kernel: Optional[MemoryKernel] = None,
    tol: float = 1e-8,
    max_iter: int = 400,
    max_outer: int = 20,
    tables=None,
) -> FixedPointReport:
    """Solve P = Upsilon(P) + G on [T, horizon] by iteration.

    On the step grid the effective law is equivalent to

        (1 - K) P = K*(Z M Q) - K cum(Z M Q) + Z K (V*P) + K*F - K cum(F),

    with * the causal convolution, cum the running integral, V = int M and
    F = B0 + B1 + B2.  P on [0, T) is taken from the direct solve.  Inner
    iterations hold F fixed and are FFT based; outer iterations recompute F
    along the current path.  The update norm is sup_{t >= T} t^{1/2+delta} |dP|.
    """
    cfg = config
    h = cfg.step
    N = cfg.n_steps
    Z = cfg.constants.Z
    if direct is None:
        direct = solve_nonlinear(cfg, tables=tables)
    if kernel is None:
        kernel = solve_K_volterra(cfg.pot, cfg.constants, N * h, h)
    if abs(kernel.step - h) > 1e-15 or kernel.t.size < N + 1:
        raise ValueError("kernel grid does not match the solver grid")
    if T is None:
        T = default_T(kernel)
    nT = int(math.ceil(T / h - 1e-9))
    if not 0 < nT < N:
        raise ValueError("T must lie inside (0, horizon)")
    T = nT * h
    K = kernel.K[: N + 1]
    one_minus_K = 1.0 - K[nT:]
    if np.min(np.abs(one_minus_K)) < 0.5:
        raise ValueError("1 - K is too small on [T, horizon]; choose a larger T")
    if tables is None:
        tables = _lag_tables(cfg.pot, N * h, h, N, cfg.r_max)
    A, C, dr, _ = tables
    M = -3.0 * A[:, 0]
    ZM = Z * M
    V = _cumtrapz(M, h)
    t = h * np.arange(N + 1)
    weight = np.zeros(N + 1)
    weight[nT:] = t[nT:] ** (0.5 + delta)

    def norm(v):
        return float(np.max(weight[:, None] * np.abs(v)))

    P = direct.P.copy()
    X0 = direct.X[0]
    if not np.any(P) and not np.any(direct.B0):
        return FixedPointReport(direct, T, delta, 1, [], [0.0], [0.0], 0.0)

    def path(P):
        return X0 + _cumtrapz(P, h)

    ratios: list = []
    norms: list = []
    outer_updates: list = []
    iterations = 0
    F = direct.B0 + direct.B1 + direct.B2
    for outer in range(max_outer):
        KF = _conv3(K, F, h) - K[:, None] * _cumtrapz(F, h)
        prev = None
        for _ in range(max_iter):
            Q = _cumtrapz(P, h)
            R = ZM[:, None] * Q
            rhs = _conv3(K, R, h) - K[:, None] * _cumtrapz(R, h) + Z * K[:, None] * _conv3(V, P, h) + KF
            Pn = P.copy()
            Pn[nT:] = rhs[nT:] / one_minus_K[:, None]
            upd = norm(Pn - P)
            P = Pn
            iterations += 1
            norms.append(upd)
            if prev is not None and prev > 0:
                ratios.append(upd / prev)
                if upd / prev >= 1.0 and upd > tol * norm(P):
                    raise ContractionError(f"update-norm ratio {upd / prev:.3g} >= 1", upd / prev)
            prev = upd
            if upd <= tol * max(norm(P), 1e-300):
                break
        X = path(P)
        Fn = F.copy()
        Fn[nT:] = _forcing_path(cfg, A, C, dr, X, np.ascontiguousarray(P), nT)[nT:]
        change = norm(Fn - F) / max(norm(F), 1e-300)
        outer_updates.append(change)
        F = Fn
        if change <= tol:
            break
    else:
        raise ContractionError(f"forcing update did not settle after {max_outer} passes", float("nan"))

    X = path(P)
    nan = np.full_like(P, np.nan)
    traj = Trajectory(
        t=t, X=X, P=P, Pdot=np.gradient(P, h, axis=0), L=nan, B0=nan.copy(), B1=nan.copy(),
        B2=nan.copy(), B1_quad=nan.copy(),
        meta={"method": "fixed point", "step": h, "horizon": N * h, "T": T, "delta": delta,
              "forcing": "B0 + B1 + B2 stored in B0 on [T, horizon]"},
    )
    traj.B0[nT:] = F[nT:]
    sel = slice(nT, None)
    scale = float(np.max(np.abs(direct.P[sel])))
    agreement = float(np.max(np.abs(P[sel] - direct.P[sel]))) / scale if scale > 0 else 0.0
    return FixedPointReport(traj, T, delta, iterations, ratios, norms, outer_updates, agreement)


def fixed_point_refinement(
    config: NonlinearConfig,
    T: Optional[float] = None,
    delta: float = 0.3,
    *,
    directs: Optional[dict] = None,
) -> dict:
    """Compare the fixed-point and direct solutions at steps h and h/2.

    Both discretizations are second order but not identical, so their raw
    gap is O(h^2).  Richardson extrapolation (4 P_{h/2} - P_h)/3 of each route
    removes the common leading error; the gap of the extrapolated pair
    measures the agreement of the two formulations.  ``directs`` may supply
    precomputed direct trajectories keyed by step.
    """
    from dataclasses import replace

    h = config.step
    out: dict = {"steps": [h, 0.5 * h]}
    sols = {}
    for hh in out["steps"]:
        cfg = replace(config, step=hh)
        direct = directs.get(hh) if directs else None
        if direct is None:
            direct = solve_nonlinear(cfg)
        rep = fixed_point_solve(cfg, T=T, delta=delta, direct=direct)
        # the coarse run fixes T, which is then a grid time of both steps
        T = rep.T
        sols[hh] = (direct.P, rep.trajectory.P, rep)
    (Dh, Fh, rh), (Dq, Fq, rq) = sols[h], sols[0.5 * h]
    nT = int(round(rh.T / h))
    if abs(rq.T - rh.T) > 1e-9:
        raise ValueError("T differs between the two steps; pass T explicitly")
    s = slice(nT, None)
    Dq2, Fq2 = Dq[::2], Fq[::2]
    DR = (4 * Dq2 - Dh) / 3
    FR = (4 * Fq2 - Fh) / 3
    scale = float(np.max(np.abs(DR[s])))
    if scale == 0:
        scale = 1.0
    out.update(
        T=rh.T,
        raw_agreement=[rh.agreement, rq.agreement],
        extrapolated_agreement=float(np.max(np.abs(DR[s] - FR[s]))) / scale,
        direct_refinement_change=float(np.max(np.abs(Dq2[s] - Dh[s]))) / scale,
        ratios=[rh.ratios, rq.ratios],
        max_ratio=max(max(rh.ratios, default=0.0), max(rq.ratios, default=0.0)),
        iterations=[rh.iterations, rq.iterations],
        outer_updates=[rh.outer_updates, rq.outer_updates],
        reports=[rh, rq],
    )
    return out


# ---------------------------------------------------------------------------
# decay analysis


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    amplitude: float
    r2: float
    window: tuple
    shrunk: bool = False


def fit_decay_exponent(t, y, window: Sequence[float], *, n_samples: int = 400) -> DecayFit:
    """Fit |y| ~ amplitude * t^(-exponent) by log-log least squares.

    The series is resampled at log-uniform times inside the window so that
    every part of the window carries equal weight.  If |y| vanishes inside
    the window, the window shrinks to the longest stretch where it does not;
    the result must still span at least one decade.
    """
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if y.ndim == 2:
        y = np.linalg.norm(y, axis=1)
    a, b = float(window[0]), float(window[1])
    if not 0 < a < b:
        raise ValueError("window must satisfy 0 < a < b")
    if a < t[0] or b > t[-1] * (1 + 1e-12):
        raise ValueError("window lies outside the series")
    sel = (t >= a) & (t <= b)
    ts, ys = t[sel], y[sel]
    shrunk = False
    if np.any(ys <= 0):
        good = ys > 0
        # longest run of positive values
        best, start, cur = (0, 0), None, 0
        for i, g in enumerate(np.append(good, False)):
            if g and start is None:
                start = i
            if not g and start is not None:
                if i - start > best[1] - best[0]:
                    best = (start, i)
                start = None
        ts, ys = ts[best[0]: best[1]], ys[best[0]: best[1]]
        shrunk = True
        if ts.size < 2:
            raise ValueError("series vanishes throughout the window")
        a, b = float(ts[0]), float(ts[-1])
    if b / a < 10 * (1 - 1e-9):
        raise ValueError(f"window [{a:.4g}, {b:.4g}] spans less than one decade")
    lt = np.linspace(math.log(a), math.log(b), n_samples)
    ly = np.interp(lt, np.log(ts), np.log(ys))
    slope, icpt = np.polyfit(lt, ly, 1)
    pred = slope * lt + icpt
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(-slope), float(math.exp(icpt)), r2, (a, b), shrunk)


@dataclass(frozen=True)
class XInfinity:
    X: np.ndarray
    uncertainty: float
    exponent: float
    tail: np.ndarray
    monotone: bool
    monotone_since: float = 0.0


def x_infinity(traj: Trajectory, *, decay_ratio: float = 1e-3) -> XInfinity:
    """Limit position from the last decade of the run.

    X_inf = X_horizon + int_{horizon}^inf P, with |P| continued by the power
    law fitted on [horizon/10, horizon] and the direction of P_horizon.  The
    uncertainty is the magnitude of that extrapolated tail.
    """
    P = traj.P
    p0 = float(np.linalg.norm(P[0]))
    pend = float(np.linalg.norm(P[-1]))
    if not np.any(P):
        return XInfinity(traj.X[-1].copy(), 0.0, float("inf"), np.zeros(3), True, 0.0)
    if p0 > 0 and pend >= decay_ratio * p0:
        raise ValueError(f"trajectory has not decayed: |P_end|/|P_0| = {pend / p0:.3g}")
    t_end = float(traj.t[-1])
    fit = fit_decay_exponent(traj.t, P, (0.1 * t_end, t_end))
    if fit.exponent <= 1.0:
        tail = np.full(3, np.inf)
        unc = float("inf")
    else:
        mass = fit.amplitude * t_end ** (1.0 - fit.exponent) / (fit.exponent - 1.0)
        direction = P[-1] / pend if pend > 0 else np.zeros(3)
        tail = mass * direction
        unc = float(mass)
    Xinf = traj.X[-1] + (tail if np.all(np.isfinite(tail)) else 0.0)
    dist = np.linalg.norm(traj.X - Xinf, axis=1)
    rises = np.nonzero(np.diff(dist) > 1e-15 * max(1.0, float(dist.max())))[0]
    since = float(traj.t[rises[-1] + 1]) if rises.size else 0.0
    monotone = since <= 0.1 * t_end
    return XInfinity(Xinf, unc, fit.exponent, tail, monotone, since)
