"""Direct simulation of the coupled particle and field, used as an oracle.

The field is held in wavenumber space, where the equations of motion read

    Pdot = nu Re int i k W^(k) e^{-ik.X} beta^(k) d^3k,      Xdot = P,
    i d/dt beta^(k) = (k^2/2) beta^(k) + W^(k) e^{ik.X}.

The free part is diagonal, so a step with the particle frozen at X_mid is
exact:  beta^ <- e^{-i w h} beta^ - i W^ e^{ik.X_mid} (1 - e^{-i w h})/(i w),
w = k^2/2.  The particle uses a kick-drift-kick splitting around it.

The conserved energy of the scaled system is

    E = |P|^2/2 + (nu/4) int k^2 |beta^|^2 + nu Re int conj(W^ e^{ik.X}) beta^,

whose X-gradient is minus the force above.

Nodes are spherical: Gauss-Legendre panels in k (graded so that every panel
spans at most one oscillation of e^{-i k^2 t/2} up to the resolved time),
Gauss-Legendre in mu = cos(theta), and, in the full three-dimensional mode,
uniform in the azimuth.  In the axisymmetric mode the azimuth is integrated
out analytically; the particle must then move on the z axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import j0

from . import quad_core as qc
from .dynamics import FieldInit, NonlinearConfig, ParticleState, solve_nonlinear
from .kernels import CouplingConstants, RadialPotential

__all__ = [
    "OracleGrid",
    "SpectralField",
    "OracleConfig",
    "OracleRun",
    "ResolutionError",
    "init_field",
    "step",
    "force",
    "energy",
    "splash_residual",
    "splash_profile",
    "run_oracle",
    "compare_with_effective",
]

PREF = (2 * math.pi) ** -1.5


class ResolutionError(ValueError):
    """The node set cannot represent the requested configuration."""


@dataclass(frozen=True)
class OracleGrid:
    """Node-set parameters.

    ``t_resolved`` is the latest time at which the k panels still resolve the
    free phase; ``panels_per_turn`` panels of ``k_nodes`` Gauss points are
    placed per 2 pi of that phase.
    """

    k_max: float = 7.5
    k_nodes: int = 12
    panels_per_turn: float = 1.0
    n_mu: int = 24
    n_phi: int = 0
    t_resolved: float = 50.0

    @property
    def full3d(self) -> bool:
        return self.n_phi > 0

    def refined(self) -> "OracleGrid":
        return replace(self, panels_per_turn=2 * self.panels_per_turn, n_mu=int(1.5 * self.n_mu))


@dataclass
class SpectralField:
    """Field values at the nodes plus the quadrature weights of d^3k."""

    k: np.ndarray
    kvec: np.ndarray
    weights: np.ndarray
    beta: np.ndarray
    t: float
    grid: OracleGrid
    w_hat: np.ndarray
    mu: np.ndarray
    sin_theta: np.ndarray

    @property
    def axisymmetric(self) -> bool:
        return not self.grid.full3d

    def copy(self) -> "SpectralField":
        return replace(self, beta=self.beta.copy())

    def norm(self) -> float:
        """Weighted L2 norm of beta^ (equal to ||beta||_2 by Plancherel)."""
        return float(math.sqrt(np.sum(self.weights * np.abs(self.beta) ** 2)))


def _k_nodes(grid: OracleGrid) -> tuple[np.ndarray, np.ndarray]:
    turns = grid.k_max**2 * grid.t_resolved / (4 * math.pi)
    n_panels = max(int(math.ceil(turns * grid.panels_per_turn)), 1)
    edges = grid.k_max * np.sqrt(np.arange(n_panels + 1) / n_panels)
    edges = np.union1d(edges, np.linspace(0.0, grid.k_max, int(math.ceil(grid.k_max / 0.125)) + 1))
    return qc._panel_nodes(edges, grid.k_nodes)


def _build_nodes(grid: OracleGrid):
    k, wk = _k_nodes(grid)
    mu, wmu = np.polynomial.legendre.leggauss(grid.n_mu)
    st = np.sqrt(1 - mu * mu)
    if grid.full3d:
        phi = 2 * math.pi * np.arange(grid.n_phi) / grid.n_phi
        wphi = np.full(grid.n_phi, 2 * math.pi / grid.n_phi)
        K, MU, PH = np.meshgrid(k, mu, phi, indexing="ij")
        W = (wk * k * k)[:, None, None] * wmu[None, :, None] * wphi[None, None, :]
        S = np.sqrt(1 - MU * MU)
        kvec = np.stack([K * S * np.cos(PH), K * S * np.sin(PH), K * MU], axis=-1).reshape(-1, 3)
        return K.ravel(), kvec, W.ravel(), MU.ravel(), S.ravel()
    K, MU = np.meshgrid(k, mu, indexing="ij")
    W = (wk * k * k)[:, None] * wmu[None, :] * (2 * math.pi)
    S = np.sqrt(1 - MU * MU)
    kvec = np.stack([K * S, np.zeros_like(K), K * MU], axis=-1).reshape(-1, 3)
    return K.ravel(), kvec, W.ravel(), MU.ravel(), S.ravel()


def _check_axis(v, what: str, field: SpectralField) -> None:
    if field.axisymmetric and (abs(v[0]) > 0 or abs(v[1]) > 0):
        raise ResolutionError(f"{what} must lie on the z axis in the axisymmetric mode")


def init_field(init: FieldInit, grid: OracleGrid, pot: Optional[RadialPotential]) -> SpectralField:
    """Sample beta0^ = A w^3 exp(-w^2 k^2/2) e^{ik.c} on the node set.

    ``pot=None`` switches the coupling off (W = 0).  The sampled norm is
    compared with the closed form |A| (pi w^2)^{3/4}.
    """
    k, kvec, weights, mu, st = _build_nodes(grid)
    kk = np.unique(k)
    spacing = float(np.max(np.diff(kk[kk <= min(4.0 / init.w, grid.k_max)])))
    if spacing > init.w ** -1 / 8:
        raise ResolutionError("k nodes do not resolve the initial Gaussian (need 8 per width)")
    if grid.k_max * init.w < 6.0 and init.A != 0:
        raise ResolutionError("k_max truncates the initial Gaussian")
    w_hat = np.zeros_like(k) if pot is None else pot.w_hat(k)
    fld = SpectralField(k, kvec, weights, np.zeros(k.size, dtype=complex), 0.0, grid, w_hat, mu, st)
    _check_axis(init.center, "the field center", fld)
    fld.beta = init.beta_hat(k, kvec)
    if init.A != 0:
        rel = abs(fld.norm() - init.l2_norm()) / init.l2_norm()
        if rel > 1e-6:
            raise ResolutionError(f"sampled norm deviates from the closed form by {rel:.2e}")
    return fld


def _phase(field: SpectralField, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    _check_axis(X, "the particle", field)
    if field.grid.k_max * float(np.linalg.norm(X)) > 0.5 * field.grid.n_mu:
        raise ResolutionError(f"|X| = {np.linalg.norm(X):.3g} beyond the angular resolution bound")
    theta = field.kvec[:, 2] * X[2] if field.axisymmetric else field.kvec @ X
    out = np.empty(theta.shape, dtype=complex)
    out.real = np.cos(theta)
    out.imag = np.sin(theta)
    return out


def force(field: SpectralField, X, nu: float) -> np.ndarray:
    """nu Re int i k W^ e^{-ik.X} beta^ d^3k."""
    g = field.weights * field.w_hat * np.conj(_phase(field, X)) * field.beta
    if field.axisymmetric:
        return np.array([0.0, 0.0, nu * float(np.real(1j * np.dot(field.kvec[:, 2], g)))])
    return nu * np.real(1j * (field.kvec.T @ g))


def energy(field: SpectralField, P, X, nu: float) -> float:
    P = np.asarray(P, dtype=float)
    src = field.w_hat * _phase(field, X)
    kin = 0.5 * float(P @ P)
    fld = 0.25 * nu * float(np.sum(field.weights * field.k**2 * np.abs(field.beta) ** 2))
    cpl = nu * float(np.real(np.sum(field.weights * np.conj(src) * field.beta)))
    return kin + fld + cpl


def _propagator(k: np.ndarray, h: float, source: str) -> tuple[np.ndarray, np.ndarray]:
    """Free rotation e^{-i w h} and source weight for one step of length h."""
    omega = 0.5 * k**2
    y = 0.5 * omega * h
    rot = np.exp(-1j * omega * h)
    if source == "exact":
        # (1 - e^{-i w h}) / (i w) written without cancellation
        weight = h * np.exp(-1j * y) * np.sinc(y / math.pi)
    elif source == "midpoint":
        weight = h * np.exp(-1j * y)
    else:
        raise ValueError("source must be 'exact' or 'midpoint'")
    return rot, weight


def propagate(field: SpectralField, X_mid, h: float, source: str = "exact") -> SpectralField:
    """Advance beta^ by h with the particle frozen at X_mid."""
    rot, weight = _propagator(field.k, h, source)
    out = field.copy()
    out.beta = rot * field.beta
    if np.any(field.w_hat):
        out.beta -= 1j * weight * field.w_hat * _phase(field, X_mid)
    out.t = field.t + h
    return out


class _Stepper:
    """Kick-drift-kick stepping with the per-step factors computed once.

    The force at the end of a step is reused as the first kick of the next,
    so each step costs two phase evaluations and one field update.
    """

    def __init__(self, field: SpectralField, h: float, nu: float, source: str):
        if not 0 < h <= 0.05:
            raise ValueError("h must lie in (0, 0.05]")
        self.h = h
        self.nu = nu
        rot, weight = _propagator(field.k, h, source)
        self.rot = rot
        self.src = -1j * weight * field.w_hat
        self.coupled = bool(np.any(field.w_hat))
        self.force_cache: Optional[tuple] = None

    def force(self, field: SpectralField, X: np.ndarray) -> np.ndarray:
        if self.force_cache is not None and self.force_cache[0] is field.beta and np.array_equal(self.force_cache[1], X):
            return self.force_cache[2]
        return force(field, X, self.nu)

    def __call__(self, field: SpectralField, state: ParticleState):
        h = self.h
        if field.t + h > field.grid.t_resolved * (1 + 1e-12):
            raise ResolutionError("time beyond the phase resolution of the k nodes")
        F0 = self.force(field, state.X)
        Phalf = state.P + 0.5 * h * F0
        X_mid = state.X + 0.5 * h * Phalf
        X_new = state.X + h * Phalf
        beta = self.rot * field.beta
        if self.coupled:
            beta += self.src * _phase(field, X_mid)
        nf = replace(field, beta=beta, t=field.t + h)
        F1 = force(nf, X_new, self.nu)
        self.force_cache = (nf.beta, X_new, F1)
        P_new = Phalf + 0.5 * h * F1
        return nf, ParticleState(state.t + h, X_new, P_new), P_new - state.P


def step(field: SpectralField, state: ParticleState, h: float, nu: float, *, source: str = "exact"):
    """One kick-drift-kick step; returns (field', state', impulse)."""
    return _Stepper(field, h, nu, source)(field, state)


def splash_profile(field: SpectralField, X) -> np.ndarray:
    """Node values of the static profile -2 (-Delta)^{-1} W^X, i.e. -2 W^ e^{ik.X}/k^2."""
    return -2.0 * field.w_hat * _phase(field, X) / field.k**2


def _to_space(field: SpectralField, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """(2 pi)^{-3/2} int e^{-ik.x} values d^3k at the given points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(points.shape[0], dtype=complex)
    for i, x in enumerate(points):
        if field.axisymmetric:
            rho = math.hypot(x[0], x[1])
            # the azimuthal integral is already in the weights (factor 2 pi)
            ker = j0(field.k * field.sin_theta * rho) * np.exp(-1j * field.k * field.mu * x[2])
        else:
            ker = np.exp(-1j * (field.kvec @ x))
        out[i] = PREF * np.sum(field.weights * ker * values)
    return out


def splash_residual(field: SpectralField, X, points) -> float:
    """sup over points of |beta(x) + 2 (-Delta)^{-1} W^X (x)|."""
    X = np.asarray(X, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.max(np.linalg.norm(pts, axis=1)) * field.grid.k_max > 0.5 * field.grid.n_mu:
        raise ResolutionError("sample points outside the resolution bound")
    diff = field.beta - splash_profile(field, X)
    return float(np.max(np.abs(_to_space(field, diff, pts))))


# ---------------------------------------------------------------------------
# runs


@dataclass(frozen=True)
class OracleConfig:
    pot: Optional[RadialPotential] = field(default_factory=RadialPotential)
    constants: CouplingConstants = field(default_factory=CouplingConstants)
    P0: tuple = (0.0, 0.0, 1e-2)
    X0: tuple = (0.0, 0.0, 0.0)
    field_init: FieldInit = field(default_factory=FieldInit)
    horizon: float = 50.0
    step: float = 0.01
    grid: OracleGrid = field(default_factory=OracleGrid)
    source: str = "exact"
    record_every: int = 1
    splash_points: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.5), (0.0, 0.0, -0.5), (0.5, 0.0, 0.0), (1.0, 0.0, 1.0))
    splash_every: int = 100

    def __post_init__(self) -> None:
        if self.horizon > self.grid.t_resolved * (1 + 1e-12):
            raise ValueError("horizon exceeds the grid's resolved time; raise grid.t_resolved")
        if not 0 < self.step <= 0.05:
            raise ValueError("step must lie in (0, 0.05]")


@dataclass
class OracleRun:
    t: np.ndarray
    X: np.ndarray
    P: np.ndarray
    E: np.ndarray
    norm: np.ndarray
    splash_t: np.ndarray
    splash: np.ndarray
    field: SpectralField
    meta: dict

    COLUMNS = ("t", "X1", "X2", "X3", "P1", "P2", "P3", "E", "beta_norm")

    def energy_drift(self) -> float:
        scale = abs(self.E[0]) if self.E[0] != 0 else 1.0
        return float(np.max(np.abs(self.E - self.E[0])) / scale)

    def to_rows(self):
        return np.column_stack([self.t, self.X, self.P, self.E, self.norm])


def run_oracle(config: OracleConfig) -> OracleRun:
    cfg = config
    nu = cfg.constants.nu
    fld = init_field(cfg.field_init, cfg.grid, cfg.pot)
    N = int(round(cfg.horizon / cfg.step))
    state = ParticleState(0.0, np.array(cfg.X0), np.array(cfg.P0))
    rec = list(range(0, N + 1, cfg.record_every))
    if rec[-1] != N:
        rec.append(N)
    rec_set = set(rec)
    t, X, P, E, nrm = [], [], [], [], []
    st, sv = [], []
    pts = np.array(cfg.splash_points, dtype=float)

    def record(n):
        t.append(n * cfg.step)
        X.append(state.X.copy())
        P.append(state.P.copy())
        E.append(energy(fld, state.P, state.X, nu))
        nrm.append(fld.norm())

    record(0)
    stepper = _Stepper(fld, cfg.step, nu, cfg.source)
    for n in range(1, N + 1):
        fld, state, _ = stepper(fld, state)
        if n in rec_set:
            record(n)
        if cfg.pot is not None and (n % cfg.splash_every == 0 or n == N):
            st.append(n * cfg.step)
            sv.append(splash_residual(fld, state.X, pts))
    meta = {
        "nodes": int(fld.k.size),
        "step": cfg.step,
        "horizon": N * cfg.step,
        "mode": "full3d" if cfg.grid.full3d else "axisymmetric",
        "source": cfg.source,
    }
    return OracleRun(
        np.array(t), np.array(X), np.array(P), np.array(E), np.array(nrm),
        np.array(st), np.array(sv), fld, meta,
    )


def compare_with_effective(
    config: OracleConfig,
    *,
    effective_step: Optional[float] = None,
    oracle: Optional[OracleRun] = None,
    effective=None,
) -> dict:
    """Run both solvers from the same data and compare P_t.

    The deviation is max_t |P_oracle - P_effective| / max_t |P_effective| on
    the common time grid.
    """
    cfg = config
    h_eff = effective_step or 2 * cfg.step
    if oracle is None:
        oracle = run_oracle(cfg)
    if effective is None:
        effective = solve_nonlinear(
            NonlinearConfig(
                pot=cfg.pot, constants=cfg.constants, P0=cfg.P0, X0=cfg.X0,
                field_init=cfg.field_init, horizon=cfg.horizon, step=h_eff,
            )
        )
    t_common = effective.t
    Po = np.column_stack([np.interp(t_common, oracle.t, oracle.P[:, i]) for i in range(3)])
    if not np.allclose(oracle.t[np.searchsorted(oracle.t, t_common)], t_common, atol=1e-9, rtol=0):
        raise ValueError("oracle records do not contain the effective grid times")
    diff = np.max(np.abs(Po - effective.P))
    scale = float(np.max(np.abs(effective.P)))
    dev = float(diff / scale) if scale > 0 else float(diff)
    return {"deviation": dev, "oracle": oracle, "effective": effective, "effective_step": h_eff}
