import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from tracerfriction import quad_core as qc

FRESNEL = math.sqrt(math.pi / 8)


def test_fresnel_pair():
    val = qc.gauss_oscillatory(None, -1j, 0)
    assert abs(val.real - FRESNEL) < 1e-10
    assert abs(val.imag - FRESNEL) < 1e-10


@settings(max_examples=25, deadline=None)
@given(
    re=st.floats(0.3, 4.0),
    im=st.floats(-6.0, 6.0),
    m=st.integers(0, 6),
)
def test_gaussian_moment_closed_form(re, im, m):
    # int_0^inf r^m exp(-a r^2) dr = Gamma((m+1)/2) / (2 a^{(m+1)/2})
    a = complex(re, im)
    exact = special.gamma(0.5 * (m + 1)) / (2 * a ** (0.5 * (m + 1)))
    val = qc.gauss_oscillatory(None, a, m)
    assert abs(val - exact) <= 1e-9 * max(1.0, abs(exact))


def test_weighted_moment_matches_scipy():
    w = lambda r: np.exp(-r * r)  # noqa: E731
    val = qc.gauss_oscillatory(w, 0.5j * 3.0, 2)
    re = integrate.quad(lambda r: r * r * math.exp(-r * r) * math.cos(1.5 * r * r), 0, 12, limit=400)[0]
    im = integrate.quad(lambda r: -r * r * math.exp(-r * r) * math.sin(1.5 * r * r), 0, 12, limit=400)[0]
    assert abs(val - complex(re, im)) < 1e-9


def test_negative_real_part_rejected():
    with pytest.raises(ValueError):
        qc.gauss_oscillatory(None, -1.0, 0)


@pytest.mark.parametrize("p", [0.3, 1.0, 2.5])
@pytest.mark.parametrize("sign", [1, -1])
def test_pv_pole_against_cauchy_weight(p, sign):
    f = lambda r: np.exp(-r * r)  # noqa: E731
    rho0 = math.sqrt(p)
    # PV int f/((r - rho0)(r + rho0)) via QUADPACK's Cauchy weight
    pv = integrate.quad(lambda r: math.exp(-r * r) / (r + rho0), 0, 10, weight="cauchy", wvar=rho0)[0]
    expected = pv + sign * 1j * math.pi * math.exp(-p) / (2 * rho0)
    val = qc.pv_pole_integral(f, p, sign)
    assert abs(val - expected) < 1e-9


def test_pv_pole_rejects_bad_sign():
    with pytest.raises(ValueError):
        qc.pv_pole_integral(lambda r: np.exp(-r * r), 1.0, 0)


@pytest.mark.parametrize("t", [0.5, 2.0, 7.0])
def test_fourier_inversion_exponential(t):
    a = 1.3
    # -(1/pi) int Re[-1/(ik + a)] cos(kt) dk = e^{-a t}
    val = qc.fourier_inversion(lambda k: -1.0 / (1j * k + a), t, qc.QuadratureSpec(target_error=1e-6, truncation=60.0))
    assert abs(val - math.exp(-a * t)) < 1e-5


def test_tanh_sinh_endpoint_singularities():
    v1 = qc.tanh_sinh(lambda x, xa, xb: 1.0 / np.sqrt(xa), 0.0, 1.0)
    v2 = qc.tanh_sinh(lambda x, xa, xb: np.log(xa), 0.0, 1.0)
    assert abs(v1 - 2.0) < 1e-11
    assert abs(v2 + 1.0) < 1e-11


def test_complex_erf_matches_series():
    z = 0.7 + 0.4j
    # Maclaurin series 2/sqrt(pi) sum (-1)^n z^{2n+1} / (n! (2n+1))
    series = 2 / math.sqrt(math.pi) * sum(
        (-1) ** n * z ** (2 * n + 1) / (math.factorial(n) * (2 * n + 1)) for n in range(40)
    )
    assert abs(qc.complex_erf(z) - series) < 1e-14


def test_composite_gauss_polynomial_exact():
    res = qc.composite_gauss(lambda x: x**5 - 2 * x**2, np.linspace(0, 2, 5), 16)
    assert abs(res.value - (64 / 6 - 16 / 3)) < 1e-13
    assert res.error < 1e-12


def test_spec_validation():
    with pytest.raises(ValueError):
        qc.QuadratureSpec(nodes=4)
    with pytest.raises(ValueError):
        qc.QuadratureSpec(rule="simpson")
    with pytest.raises(ValueError):
        qc.QuadratureSpec(target_error=0.0)
    assert qc.QuadratureSpec().refined().nodes == 32


def test_repeatable():
    a = qc.gauss_oscillatory(lambda r: np.exp(-r * r), 2j, 4)
    b = qc.gauss_oscillatory(lambda r: np.exp(-r * r), 2j, 4)
    assert a == b
