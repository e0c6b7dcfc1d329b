import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from tracerfriction.dynamics import (
    BlowUpError,
    FieldInit,
    NonlinearConfig,
    b0_force,
    b0_force_radial,
    fit_decay_exponent,
    fixed_point_solve,
    solve_linearized,
    solve_nonlinear,
    x_infinity,
)
from tracerfriction.kernels import CouplingConstants, RadialPotential

POT = RadialPotential()
C = CouplingConstants(1.0)


@pytest.fixture(scope="module")
def short_run():
    return solve_nonlinear(NonlinearConfig(pot=POT, constants=C, horizon=20.0, step=0.02))


def test_field_init_norms():
    fi = FieldInit(A=0.3, w=1.4, c=(0.0, 0.2, -0.1))
    # ||beta0||^2 = A^2 int exp(-r^2/w^2) d^3x, radial quadrature
    ref = math.sqrt(0.09 * 4 * math.pi * integrate.quad(lambda r: r * r * math.exp(-r * r / 1.96), 0, 30)[0])
    assert fi.l2_norm() == pytest.approx(ref, rel=1e-12)
    # centred moment norm by radial quadrature
    f0 = FieldInit(A=0.3, w=1.4)
    ref4 = math.sqrt(0.09 * 4 * math.pi * integrate.quad(
        lambda r: r * r * (1 + r * r) ** 4 * math.exp(-r * r / 1.96), 0, 40)[0])
    assert f0.moment_norm() == pytest.approx(ref4, rel=1e-12)
    assert f0.is_small(ref4 * 1.01) and not f0.is_small(ref4 * 0.99)


def test_field_init_validation():
    with pytest.raises(ValueError):
        FieldInit(w=0.0)
    with pytest.raises(ValueError):
        FieldInit(c=(0.0, 1.0))


@pytest.mark.parametrize("t", [0.0, 0.8, 4.0])
def test_b0_routes_agree(t):
    fi = FieldInit(A=1e-2, w=0.9, c=(0.1, -0.3, 0.4))
    X = np.array([0.2, 0.1, -0.3])
    a = b0_force(POT, C, fi, t, X)
    b = b0_force_radial(POT, C, fi, t, X)
    assert np.max(np.abs(a - b)) < 1e-10


def test_b0_vanishes_for_centred_data():
    assert np.all(b0_force(POT, C, FieldInit(), 1.0, np.zeros(3)) == 0.0)


def test_ballistic_without_coupling():
    cfg = NonlinearConfig(pot=POT, constants=CouplingConstants(0.0), horizon=10.0, step=0.05)
    tr = solve_nonlinear(cfg)
    assert tr.meta["ballistic"]
    assert np.all(tr.P == tr.P[0])
    assert np.allclose(tr.X[-1], np.asarray(cfg.P0) * 10.0, atol=1e-14)


def test_zero_data_stays_zero():
    cfg = NonlinearConfig(pot=POT, constants=C, P0=(0.0, 0.0, 0.0),
                          field_init=FieldInit(A=0.0), horizon=5.0, step=0.05)
    tr = solve_nonlinear(cfg)
    assert not np.any(tr.P)


def test_decomposition_and_kinematics(short_run):
    assert short_run.decomposition_residual() < 1e-14
    assert short_run.b1_quadrature_gap() < 1e-8
    assert short_run.kinematic_residual() < 1e-6


def test_axis_symmetry(short_run):
    assert np.max(np.abs(short_run.P[:, :2])) == 0.0


def test_linear_limit_matches_linearized(short_run):
    # |P0| = 1e-2 along z with a centred field: the run stays close to q(t) P0
    lin = solve_linearized(C, POT, 20.0, 0.02)
    dev = np.max(np.abs(short_run.P[:, 2] - 1e-2 * lin.q))
    assert dev < 1e-2 * 1e-2


def test_linearized_uncoupled():
    lin = solve_linearized(CouplingConstants(0.0), POT, 5.0, 0.05)
    assert np.all(lin.q == 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        NonlinearConfig(step=0.1)
    with pytest.raises(ValueError):
        NonlinearConfig(horizon=1e4, step=0.01)
    with pytest.raises(ValueError):
        NonlinearConfig(P0=(0.0, 0.0, 1.0), eps0=0.1)


def test_range_guard():
    cfg = NonlinearConfig(pot=POT, constants=C, P0=(0.0, 0.0, 3.0), horizon=5.0, step=0.02, r_max=2.0)
    with pytest.raises((ValueError, BlowUpError)):
        solve_nonlinear(cfg)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(1e-3, 10.0))
def test_fit_recovers_power_law(p, amp):
    t = np.linspace(0.0, 1000.0, 20001)
    with np.errstate(divide="ignore"):
        y = amp * t**-p
    fit = fit_decay_exponent(t, y, (50.0, 1000.0))
    assert fit.exponent == pytest.approx(p, abs=1e-9)
    assert fit.amplitude == pytest.approx(amp, rel=1e-8)


def test_fit_window_guard():
    t = np.linspace(0, 100, 1001)
    with pytest.raises(ValueError):
        fit_decay_exponent(t, np.exp(-t), (50.0, 100.0))


def test_x_infinity_needs_decay(short_run):
    with pytest.raises(ValueError):
        x_infinity(replace(short_run, P=np.ones_like(short_run.P)))


def test_fixed_point_short_run(short_run):
    cfg = NonlinearConfig(pot=POT, constants=C, horizon=20.0, step=0.02)
    rep = fixed_point_solve(cfg, direct=short_run)
    assert rep.contracts
    assert rep.agreement < 5e-3
