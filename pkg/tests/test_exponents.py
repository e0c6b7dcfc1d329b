import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracerfriction.exponents import (
    best1_residual,
    best2_sides,
    best_decay_root,
    interval_I,
    omega,
    omega1,
    omega2,
    verify_no_root_best2,
)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.9))
def test_omega_splits(delta):
    assert abs(omega(delta) - math.pi * (omega1(delta) + omega2(delta))) < 1e-8


def test_root_against_mpmath():
    f = lambda d: mpmath.gamma(1 - d) - mpmath.gamma(0.5 - d) / (mpmath.sqrt(mpmath.pi) * (1 + 2 * d))  # noqa: E731
    ref = float(mpmath.findroot(f, 0.16))
    root = best_decay_root()
    assert abs(root - ref) < 1e-12
    assert abs(best1_residual(root)) < 1e-12


def test_root_bracket_violation_raises():
    with pytest.raises(ArithmeticError):
        best_decay_root(0.2, 0.3)


def test_best2_constant_sign():
    rep = verify_no_root_best2()
    assert rep.ok
    left, right = best2_sides(np.array([0.1, 0.3]))
    assert np.all(left > right) or np.all(left < right)


def test_interval():
    iv = interval_I()
    assert iv.is_interval()
    assert 0.64 <= iv.I_sup <= 0.68
    assert iv.bracket_width <= 1e-3 + 1e-12
    assert iv.contains(0.3)
    assert not iv.contains(0.7)
    assert omega(iv.I_sup) == pytest.approx(math.pi, abs=1e-9)


def test_interval_resolution_guard():
    with pytest.raises(ValueError):
        interval_I(0.01)


def test_delta_domain():
    with pytest.raises(ValueError):
        omega(1.2)
