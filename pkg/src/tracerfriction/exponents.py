"""Contraction integrals, the admissible interval I, best-decay equations and
the Gamma-operator audit.

Omega-type integrals
--------------------
All three integrals share the factor (1-r)^{-1/2} / (1 + (1-r)^{1/2}).  With
r = sin^2(theta) one has (1-r)^{-1/2} dr = 2 sin(theta) d theta, so

    Omega_2(d) = (1/pi) int_0^{pi/2} 2 sin(th)^{2-2d} / (1 + cos th) d th,
    Omega_1(d) = (1/pi) int_0^{pi/2} 2 / (1 + cos th) * L(th) d th,
    L(th)      = (1 - sin(th)^{1-2d}) / (1-2d) = -expm1((1-2d) ln sin th) / (1-2d).

The expm1 form is exact at every d (the d = 1/2 limit is -ln sin th) and has
no cancellation near d = 1/2.  The remaining endpoint behaviour is handled by
the tanh-sinh rule.

Best-decay equations
--------------------
int_0^inf e^{-t} t^{-a} dt = Gamma(1-a), so the two equations become
relations between Gamma values; roots are found with Brent's method.

Audit
-----
For h supported on [T, inf) (the (1-chi_T) cut is applied internally), with
Q(t) = int_T^t h, M the correlation, V its primitive and K the propagator:

    Gamma_1(t) = -Z int_0^t [K(t-s) - K(t)] M(s) [Q(t) - Q(max(s,T))] ds
    Gamma_2(t) =  I(t) Q(t),      I(t) = Z int_0^t K(t-s) M(s) ds = -K'(t)
    Gamma_3(t) =  Z K(t) int_T^t [V(t-s) - V(t)] h(s) ds

together with the leading-order approximants obtained from
Z K ~ (1/4) pi^{-5/2} t^{-1/2}, M ~ -2 pi^{3/2} t^{-3/2}, V ~ 4 pi^{3/2} t^{-1/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import gamma

from . import quad_core as qc
from .kernels import CouplingConstants, RadialPotential, tabulate_correlations
from .memory_kernel import K_TAIL, MemoryKernel, conv_I

__all__ = [
    "omega",
    "omega1",
    "omega2",
    "DeltaInterval",
    "interval_I",
    "best1_residual",
    "best2_sides",
    "best_decay_root",
    "Best2Report",
    "verify_no_root_best2",
    "AuditReport",
    "contraction_audit",
]

_HALF_PI = 0.5 * math.pi


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return delta


def _log_sin(theta, theta_from_right):
    # sin(theta) = cos(pi/2 - theta); use whichever argument is small
    return np.where(theta < 0.25 * math.pi, np.log(np.sin(theta)), np.log(np.cos(theta_from_right)))


def _lfactor(delta: float, log_sin):
    e = 1.0 - 2.0 * delta
    if e == 0.0:
        return -log_sin
    return -np.expm1(e * log_sin) / e


def _outer(theta_from_right):
    # 2 / (1 + cos theta) with cos theta = sin(pi/2 - theta)
    return 2.0 / (1.0 + np.sin(theta_from_right))


def omega1(delta: float, *, target_error: float = 1e-13) -> float:
    """Omega_1(delta), including its 1/pi prefactor."""
    delta = _check_delta(delta)

    def f(th, th_a, th_b):
        return _outer(th_b) * _lfactor(delta, _log_sin(th, th_b))

    return qc.tanh_sinh(f, 0.0, _HALF_PI, target_error=target_error) / math.pi


def omega2(delta: float, *, target_error: float = 1e-13) -> float:
    """Omega_2(delta), including its 1/pi prefactor."""
    delta = _check_delta(delta)

    def f(th, th_a, th_b):
        return _outer(th_b) * np.exp((2.0 - 2.0 * delta) * _log_sin(th, th_b))

    return qc.tanh_sinh(f, 0.0, _HALF_PI, target_error=target_error) / math.pi


def omega(delta: float, *, target_error: float = 1e-13) -> float:
    """Omega(delta): the combined integrand integrated in one pass (no 1/pi)."""
    delta = _check_delta(delta)

    def f(th, th_a, th_b):
        ls = _log_sin(th, th_b)
        return _outer(th_b) * (_lfactor(delta, ls) + np.exp((2.0 - 2.0 * delta) * ls))

    return qc.tanh_sinh(f, 0.0, _HALF_PI, target_error=target_error)


@dataclass(frozen=True)
class DeltaInterval:
    """Samples of Omega and the bracketed supremum of {delta : Omega(delta) < pi}."""

    delta: np.ndarray
    omega: np.ndarray
    I_sup: float
    bracket: tuple[float, float]
    lower: float

    @property
    def bracket_width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def contains(self, delta: float) -> bool:
        return self.lower < delta < self.I_sup

    def is_interval(self) -> bool:
        """True when the sampled set {Omega < pi} is one contiguous run."""
        idx = np.flatnonzero(self.omega < math.pi)
        return bool(idx.size) and bool(np.all(np.diff(idx) == 1))

    def to_rows(self):
        return [
            (float(d), float(o), omega1(d), omega2(d))
            for d, o in zip(self.delta, self.omega)
        ]


def interval_I(resolution: float = 1e-3, *, lo: float = 1e-3, hi: float = 0.95) -> DeltaInterval:
    """Scan Omega on (0, 1) and bracket I_sup.

    The scan locates the last sign change of Omega - pi; Brent's method then
    refines it to 1e-10, far below the requested bracket width.
    """
    if not 0 < resolution <= 1e-3:
        raise ValueError("resolution must lie in (0, 1e-3]")
    n = int(math.ceil((hi - lo) / resolution)) + 1
    deltas = np.linspace(lo, hi, n)
    values = np.array([omega(d) for d in deltas])
    inside = values < math.pi
    if not inside.any():
        raise ValueError("Omega(delta) >= pi on the whole scan: the interval I is empty")
    last = int(np.flatnonzero(inside)[-1])
    if last == n - 1:
        raise ValueError("Omega(delta) < pi up to the scan end; I_sup is not bracketed")
    a, b = deltas[last], deltas[last + 1]
    root = brentq(lambda d: omega(d) - math.pi, a, b, xtol=1e-12)
    first = int(np.flatnonzero(inside)[0])
    lower = 0.0 if first == 0 else float(deltas[first])
    return DeltaInterval(deltas, values, float(root), (float(a), float(b)), lower)


# ---------------------------------------------------------------------------
# best-decay equations

_SQRT_PI = math.sqrt(math.pi)


def best1_residual(delta):
    """Gamma(1-d) - Gamma(1/2-d) / (sqrt(pi) (1+2d)); zero at the decay root."""
    d = np.asarray(delta, dtype=float)
    return gamma(1.0 - d) - gamma(0.5 - d) / (_SQRT_PI * (1.0 + 2.0 * d))


def best2_sides(delta):
    """(left, right) sides Gamma(1-d)/(d(1-2d)sqrt(pi)) and Gamma(1/2-d)."""
    d = np.asarray(delta, dtype=float)
    return gamma(1.0 - d) / (d * (1.0 - 2.0 * d) * _SQRT_PI), gamma(0.5 - d)


def best_decay_root(lo: float = 0.01, hi: float = 0.49) -> float:
    """The unique root of the first best-decay equation in (lo, hi)."""
    f_lo, f_hi = float(best1_residual(lo)), float(best1_residual(hi))
    if f_lo * f_hi > 0:
        raise ArithmeticError(
            f"no sign change of the best-decay residual on ({lo}, {hi}): "
            f"{f_lo:.3e}, {f_hi:.3e}; this contradicts the claimed root"
        )
    return float(brentq(lambda d: float(best1_residual(d)), lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))


@dataclass(frozen=True)
class Best2Report:
    delta: np.ndarray
    left: np.ndarray
    right: np.ndarray
    crossings: int
    margin: float

    @property
    def ok(self) -> bool:
        return self.crossings == 0 and self.margin >= 0.1


def verify_no_root_best2(lo: float = 0.01, hi: float = 0.49, n: int = 1000) -> Best2Report:
    """Scan the second best-decay equation for sign changes.

    ``margin`` is the smallest gap |left - right| over the scan divided by the
    smallest size of either side over the scan; constant sign with margin
    >= 0.1 is the pass condition.
    """
    d = np.linspace(lo, hi, n)
    left, right = best2_sides(d)
    resid = left - right
    crossings = int(np.count_nonzero(np.diff(np.sign(resid)) != 0))
    scale = float(np.min(np.minimum(np.abs(left), np.abs(right))))
    margin = float(np.min(np.abs(resid)) / scale)
    if crossings:
        raise ArithmeticError(f"{crossings} sign change(s) in the second best-decay equation")
    return Best2Report(d, left, right, crossings, margin)


# ---------------------------------------------------------------------------
# contraction audit


@dataclass
class AuditReport:
    """Bound constants sup_t |Gamma_k(t)| t^{1/2+delta} / ||h||_{delta,T}."""

    delta: float
    T: float
    norm: float
    t: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray
    gamma1_tilde: np.ndarray
    gamma3_tilde: np.ndarray
    constants: dict = field(default_factory=dict)
    targets: dict = field(default_factory=dict)

    def passes(self, slack: float = 0.1) -> dict:
        c = self.constants
        return {
            "gamma1": c["gamma1"] <= self.targets["omega1"] + slack,
            "gamma3": c["gamma3"] <= self.targets["omega2"] + slack,
            "gamma2": c["gamma2"] <= slack,
        }

    def to_rows(self):
        return np.column_stack(
            [self.t, self.gamma1, self.gamma2, self.gamma3, self.gamma1_tilde, self.gamma3_tilde]
        )


def _graded_edges(a: float, b: float, first: float = 0.05, ratio: float = 1.6) -> np.ndarray:
    """Panel edges on [a, b] refined geometrically towards both endpoints."""
    length = b - a
    if length <= 0:
        return np.array([a, b])
    half = 0.5 * length
    steps = [0.0]
    w = min(first, half)
    while steps[-1] + w < half:
        steps.append(steps[-1] + w)
        w *= ratio
    steps.append(half)
    s = np.array(steps)
    return np.unique(np.concatenate([a + s, b - s[::-1]]))


def _panel_rule(a: float, b: float, n: int = 16, first: float = 0.05):
    edges = _graded_edges(a, b, first)
    return qc._panel_nodes(edges, n)


class _KernelFunction:
    """K(t) and I(t) = -K'(t) from the grid inside the horizon, tail law beyond.

    Inside the horizon I is the trapezoidal convolution Z (M * K), which is
    the derivative the Volterra scheme itself integrates; beyond it the
    derivative of the fitted tail law is used.
    """

    def __init__(self, kernel: MemoryKernel, pot: RadialPotential, constants: CouplingConstants):
        self.kernel = kernel
        self.t_grid, self.I_grid = conv_I(kernel, pot, constants)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.kernel(np.maximum(t, 0.0))

    def I(self, t):
        k = self.kernel
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        inside = t <= k.horizon
        if np.any(inside):
            out[inside] = np.interp(t[inside], self.t_grid, self.I_grid)
        if np.any(~inside):
            tt = t[~inside]
            out[~inside] = (0.5 * K_TAIL * tt**-1.5 + k.C_K * tt**-2) / k.Z
        return out


def _primitive(h: Callable, T: float, t_end: float, n: int = 4000):
    """Q(t) = int_T^t h as a spline on a log grid, plus the sampled norm."""
    grid = T * np.geomspace(1.0, t_end / T, n)
    vals = np.asarray(h(grid), dtype=float)
    spline = CubicSpline(np.log(grid), vals * grid)  # h(t) dt = (h t) d ln t
    anti = spline.antiderivative()

    def Q(s):
        s = np.asarray(s, dtype=float)
        s = np.clip(s, T, t_end)
        return anti(np.log(s))

    return Q, grid, vals


def contraction_audit(
    h: Callable[[np.ndarray], np.ndarray],
    delta: float,
    T: float,
    pot: RadialPotential,
    constants: CouplingConstants,
    kernel: MemoryKernel,
    *,
    t_factor: float = 100.0,
    n_times: int = 40,
) -> AuditReport:
    """Evaluate Gamma_1..3 of (1 - chi_T) h at log-spaced t in [T, t_factor T]."""
    delta = _check_delta(delta)
    if T < 50:
        raise ValueError("the audit needs T >= 50")
    Z = constants.Z
    if abs(Z - kernel.Z) > 1e-14:
        raise ValueError("kernel and constants disagree on Z")
    t_end = t_factor * T
    tables = tabulate_correlations(pot)
    Mt, Vt = tables["Mc"], tables["V"]
    K = _KernelFunction(kernel, pot, constants)
    Q, grid, hv = _primitive(h, T, t_end)
    weight = grid ** (0.5 + delta)
    norm = float(np.max(np.abs(hv) * weight))
    times = T * np.geomspace(1.0, t_factor, n_times)
    g1 = np.zeros(n_times)
    g2 = np.zeros(n_times)
    g3 = np.zeros(n_times)
    g1t = np.zeros(n_times)
    g3t = np.zeros(n_times)
    zk_coeff = K_TAIL  # Z K ~ zk_coeff t^{-1/2}
    m_coeff = -2.0 * math.pi**1.5
    v_coeff = 4.0 * math.pi**1.5
    for i, t in enumerate(times):
        Kt = float(K(t))
        Qt = float(Q(t))
        # Gamma_1 and I on [0, T] and [T, t]
        s0, w0 = _panel_rule(0.0, T)
        parts = [(s0, w0)]
        if t > T:
            parts.append(_panel_rule(T, t))
        s = np.concatenate([p[0] for p in parts])
        w = np.concatenate([p[1] for p in parts])
        Ks = K(t - s)
        Ms = Mt(s).real
        Qs = Q(np.maximum(s, T))
        g1[i] = -Z * np.sum(w * (Ks - Kt) * Ms * (Qt - Qs))
        g2[i] = float(K.I(t)[0]) * Qt
        if t > T:
            s1, w1 = _panel_rule(T, t)
            g3[i] = Z * Kt * np.sum(w1 * (Vt(t - s1) - Vt(t)) * h(s1))
        # leading-order approximants
        g1t[i] = _gamma1_tilde(t, T, Q, Qt, zk_coeff * m_coeff)
        g3t[i] = _gamma3_tilde(t, T, h, zk_coeff * v_coeff)
    scale = times ** (0.5 + delta) / norm if norm > 0 else np.zeros_like(times)
    consts = {
        "gamma1": float(np.max(np.abs(g1) * scale)),
        "gamma2": float(np.max(np.abs(g2) * scale)),
        "gamma3": float(np.max(np.abs(g3) * scale)),
        "gamma1_tilde": float(np.max(np.abs(g1t) * scale)),
        "gamma3_tilde": float(np.max(np.abs(g3t) * scale)),
    }
    targets = {"omega1": omega1(delta), "omega2": omega2(delta)}
    return AuditReport(delta, T, norm, times, g1, g2, g3, g1t, g3t, consts, targets)


def _gamma1_tilde(t, T, Q, Qt, coeff):
    """-coeff int_0^t [(t-s)^{-1/2} - t^{-1/2}] s^{-3/2} (Q(t) - Q(max(s,T))) ds."""
    if t <= T:
        return 0.0
    rt = math.sqrt(t)

    def kdiff_over_s(t_minus_s):
        # [(t-s)^{-1/2} - t^{-1/2}] / s without cancellation
        st = np.sqrt(t_minus_s)
        return 1.0 / (st * rt * (st + rt))

    def f0(s, s_a, s_b):
        return kdiff_over_s(s_b + (t - T)) / np.sqrt(s) * Qt

    def f1(s, s_a, s_b):
        return kdiff_over_s(s_b) / np.sqrt(s) * (Qt - Q(s))

    total = qc.tanh_sinh(f0, 0.0, T, target_error=0.0, rel_error=1e-10, max_level=12)
    total += qc.tanh_sinh(f1, T, t, target_error=0.0, rel_error=1e-10, max_level=12)
    return -coeff * total


def _gamma3_tilde(t, T, h, coeff):
    """coeff t^{-1/2} int_T^t [(t-s)^{-1/2} - t^{-1/2}] h(s) ds."""
    if t <= T:
        return 0.0
    rt = math.sqrt(t)

    def f(s, s_a, s_b):
        st = np.sqrt(s_b)
        return s / (st * rt * (st + rt)) * h(s)

    val = qc.tanh_sinh(f, T, t, target_error=0.0, rel_error=1e-10, max_level=12)
    return coeff * t**-0.5 * val
