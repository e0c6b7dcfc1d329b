import math

import numpy as np
import pytest

from tracerfriction.kernels import CouplingConstants, RadialPotential
from tracerfriction.memory_kernel import (
    K_TAIL,
    conv_I,
    correlation_grid,
    invert_K_fourier,
    solve_K_volterra,
)

POT = RadialPotential()
C = CouplingConstants(1.0)


@pytest.fixture(scope="module")
def kernel():
    return solve_K_volterra(POT, C, 200.0, 0.02)


def test_K0_exact_and_bounded(kernel):
    rep = kernel.invariant_report()
    assert kernel.K[0] == 1.0
    assert rep["bound_ok"]


def test_tail_constant():
    assert K_TAIL == pytest.approx(0.25 * math.pi**-2.5)
    assert K_TAIL == pytest.approx(0.014292, abs=1e-6)


@pytest.mark.parametrize("t", [0.5, 3.0, 30.0])
def test_volterra_matches_fourier(kernel, t):
    assert abs(kernel(t) - invert_K_fourier(POT, C, t)) < 1e-4


def test_causality():
    assert abs(invert_K_fourier(POT, C, -2.0)) < 1e-4


def test_uncoupled_kernel_is_one():
    k = solve_K_volterra(POT, CouplingConstants(0.0), 10.0, 0.05)
    assert np.all(k.K == 1.0)
    with pytest.raises(ValueError):
        invert_K_fourier(POT, CouplingConstants(0.0), 1.0)


def test_derivative_equation(kernel):
    # K' = -Z int_0^t M(t - s) K(s) ds, checked with centred differences;
    # both sides carry O(h^2) trapezoid errors of a few 1e-4 at h = 0.02
    h = kernel.step
    M = correlation_grid(POT, h, kernel.t.size - 1)
    n = np.arange(100, 2000, 150)
    dK = (kernel.K[n + 1] - kernel.K[n - 1]) / (2 * h)
    rhs = []
    for m in n:
        y = M[m::-1] * kernel.K[: m + 1]
        rhs.append(-C.Z * h * (y.sum() - 0.5 * (y[0] + y[-1])))
    assert np.max(np.abs(dK - np.array(rhs))) < 1e-3


def test_conv_I_starts_at_zero(kernel):
    t, I = conv_I(kernel, POT, C)
    # FFT round-off only
    assert abs(I[0]) < 1e-15
    assert abs(conv_I(kernel, POT, C, [0.0])[0]) < 1e-15
    with pytest.raises(ValueError):
        conv_I(kernel, POT, C, [1e6])


def test_evaluation_rejects_negative_time(kernel):
    with pytest.raises(ValueError):
        kernel(-1.0)
