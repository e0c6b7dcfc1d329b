import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tracerfriction import _accel, _fallback
from tracerfriction.convolution import causal_convolution, solve_volterra_ide

floats = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(float, st.integers(1, 200), elements=floats), st.floats(0.01, 1.0))
def test_causal_convolution_matches_loop(y, h):
    rng = np.random.default_rng(y.size)
    kern = rng.standard_normal(y.size)
    out = causal_convolution(kern, y, h)
    ref = np.zeros(y.size)
    for n in range(y.size):
        if n == 0:
            continue
        s = sum(kern[n - j] * y[j] for j in range(n + 1))
        s -= 0.5 * (kern[n] * y[0] + kern[0] * y[n])
        ref[n] = h * s
    scale = h * np.sum(np.abs(kern)) * max(1.0, np.max(np.abs(y)))
    assert np.max(np.abs(out - ref)) <= 1e-12 * scale


def _cos_solution(h, horizon=10.0):
    # y' = -int_0^t y ds  ->  y = cos t
    n = int(round(horizon / h))
    return solve_volterra_ide(np.ones(n + 1), h, n, beta=-1.0), h * np.arange(n + 1)


def test_volterra_ide_second_order():
    errs = []
    for h in (0.02, 0.01):
        y, t = _cos_solution(h)
        errs.append(np.max(np.abs(y - np.cos(t))))
    assert errs[1] < 1e-4
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_volterra_ide_alpha_and_forcing():
    # y' = -Y + 1 with Y = int y, y(0) = 0  ->  y = sin t
    h, n = 0.005, 2000
    t = h * np.arange(n + 1)
    y = solve_volterra_ide(np.zeros(n + 1), h, n, beta=0.0, y0=0.0,
                           alpha=-np.ones(n + 1), forcing=np.ones(n + 1))
    assert np.max(np.abs(y - np.sin(t))) < 1e-4


def test_kernel_too_short():
    with pytest.raises(ValueError):
        solve_volterra_ide(np.ones(5), 0.1, 10, beta=-1.0)


def test_backends_agree_volterra_leaf():
    rng = np.random.default_rng(3)
    n = 300
    args = [rng.standard_normal(n) for _ in range(3)]
    outs = []
    for impl in (_fallback, _accel):
        y = np.zeros(n)
        ytil = np.zeros(n)
        y[0], ytil[0] = 1.0, 0.5
        state = np.zeros(4)
        impl.volterra_leaf(args[0], args[1], args[2], y, ytil, np.zeros(n), state, 0.01, -0.7, 0, n)
        outs.append(y)
    assert np.array_equal(outs[0], outs[1]) or np.max(np.abs(outs[0] - outs[1])) < 1e-13


def test_backends_agree_history_sums():
    rng = np.random.default_rng(5)
    n, nr = 120, 60
    A = np.ascontiguousarray(rng.standard_normal((n + 1, nr)))
    C = np.ascontiguousarray(rng.standard_normal((n + 1, nr)))
    X = np.ascontiguousarray(np.cumsum(0.01 * rng.standard_normal((n + 1, 3)), axis=0))
    P = np.ascontiguousarray(rng.standard_normal((n + 1, 3)))
    res = []
    for impl in (_fallback, _accel):
        m, b = np.zeros(3), np.zeros(3)
        impl.history_sums(A, C, 0.1, X, P, n, m, b)
        res.append(np.concatenate([m, b]))
    assert np.max(np.abs(res[0] - res[1])) < 1e-12 * max(1.0, np.max(np.abs(res[0])))


def test_backend_flag():
    assert _accel.BACKEND in ("compiled", "python")


def test_cos_solution_phase():
    y, t = _cos_solution(0.01, 2 * math.pi)
    assert abs(y[-1] - 1.0) < 1e-3
