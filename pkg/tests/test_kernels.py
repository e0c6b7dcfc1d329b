import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from tracerfriction.kernels import (
    CouplingConstants,
    RadialPotential,
    displacement_ac,
    eval_G,
    eval_M,
    eval_Mc,
    eval_Psi,
    eval_V,
    tabulate_correlations,
)

POT = RadialPotential()


def _scipy_Mc(t, sigma=1.0):
    # 4 pi int rho^2 |W^|^2 exp(-i t rho^2 / 2) drho with W^ = exp(-sigma^2 rho^2 / 2)
    f = lambda r, part: r * r * math.exp(-((sigma * r) ** 2)) * part(0.5 * t * r * r)  # noqa: E731
    re = integrate.quad(f, 0, 12, args=(math.cos,), limit=400, epsabs=1e-13)[0]
    im = -integrate.quad(f, 0, 12, args=(math.sin,), limit=400, epsabs=1e-13)[0]
    return 4 * math.pi * complex(re, im)


def test_coupling_constants():
    assert CouplingConstants(1.5).Z == pytest.approx(1.0)
    with pytest.raises(ValueError):
        CouplingConstants(-1.0)


def test_potential_validation():
    with pytest.raises(ValueError):
        RadialPotential(sigma=0.0)
    with pytest.raises(ValueError):
        RadialPotential.tabulated([0.0, 1.0], [0.9, 0.0])
    tab = RadialPotential.tabulated(np.linspace(0, 8, 400), np.exp(-0.5 * np.linspace(0, 8, 400) ** 2))
    assert abs(tab.w_hat(0.7) - math.exp(-0.245)) < 1e-5


@pytest.mark.parametrize("t", [0.0, 0.7, 3.0, 20.0])
def test_Mc_against_scipy(t):
    assert abs(eval_Mc(POT, t) - _scipy_Mc(t)) < 1e-8


def test_M0_closed_form():
    # 4 pi int rho^2 exp(-rho^2) = pi^{3/2}
    assert abs(eval_M(POT, 0.0) - math.pi**1.5) < 1e-12


@pytest.mark.parametrize("t", [0.5, 4.0])
def test_V_against_scipy(t):
    f = lambda r: math.exp(-r * r) * math.sin(0.5 * t * r * r)  # noqa: E731
    ref = 8 * math.pi * integrate.quad(f, 0, 12, limit=400, epsabs=1e-13)[0]
    assert abs(eval_V(POT, t) - ref) < 1e-8


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 900.0))
def test_tables_interpolate_within_error(t):
    tabs = tabulate_correlations(POT)
    assert abs(tabs["Mc"](t) - eval_Mc(POT, t)) <= 10 * tabs["Mc"].max_error + 1e-9
    assert abs(tabs["V"](t) - eval_V(POT, t)) <= 10 * tabs["V"].max_error + 1e-9


def test_G_small_k_correction_scales_like_sqrt_k():
    lead = 2**1.5 * (1j - 1) * math.pi**2
    err = [abs(eval_G(POT, k) / math.sqrt(k) - lead) / abs(lead) for k in (1e-4, 1e-6)]
    # the first correction is proportional to sqrt(k)
    assert err[0] / err[1] == pytest.approx(10.0, rel=0.05)


def test_G_rejects_zero():
    with pytest.raises(ValueError):
        eval_G(POT, 0.0)


def test_a_at_origin_is_minus_M_over_three():
    for t in (0.0, 1.0, 5.0):
        a, _ = displacement_ac(POT, t, np.array([0.0]))
        assert abs(a[0].real + eval_M(POT, t) / 3) < 1e-9


def test_Psi_derivatives_consistent():
    t, r, d = 1.3, 0.8, 1e-4
    psi_p = eval_Psi(POT, t, r + d)[0]
    psi_m = eval_Psi(POT, t, r - d)[0]
    _, dpsi, _ = eval_Psi(POT, t, r)
    assert abs((psi_p - psi_m) / (2 * d) - dpsi) < 1e-6
    dp = eval_Psi(POT, t, r + d)[1]
    dm = eval_Psi(POT, t, r - d)[1]
    assert abs((dp - dm) / (2 * d) - eval_Psi(POT, t, r)[2]) < 1e-6


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        eval_Mc(POT, -1.0)


def test_G_leading_coefficient_by_extrapolation():
    # G(k)/sqrt(k) = L + c sqrt(k) + O(k); sqrt(k2) = 2 sqrt(k1) eliminates c
    lead = 2**1.5 * (1j - 1) * math.pi**2
    k1, k2 = 1e-4, 4e-4
    g1 = eval_G(POT, k1) / math.sqrt(k1)
    g2 = eval_G(POT, k2) / math.sqrt(k2)
    L = 2 * g1 - g2
    assert abs(L - lead) / abs(lead) < 1e-3
