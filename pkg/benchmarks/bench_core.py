"""Compare the compiled core with the pure-Python fallback.

Run from the repository root after an editable install::

    python3 benchmarks/bench_core.py

Both backends are timed on identical random inputs and their outputs are
compared, so the script doubles as a consistency check.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tracerfriction import _fallback

try:
    from tracerfriction import _core
except ImportError:  # pragma: no cover
    _core = None


def _inputs(n_steps: int, n_r: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_steps + 1, n_r))
    C = rng.standard_normal((n_steps + 1, n_r))
    X = np.cumsum(0.01 * rng.standard_normal((n_steps + 1, 3)), axis=0)
    P = rng.standard_normal((n_steps + 1, 3))
    return A, C, X, P


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_history(n_steps: int, repeat: int) -> dict:
    A, C, X, P = _inputs(n_steps, 400)
    dr = 5.0 / 399
    outs = {}
    times = {}
    for name, mod in (("python", _fallback), ("compiled", _core)):
        if mod is None:
            continue
        mem, b2 = np.zeros(3), np.zeros(3)
        times[name] = _time(lambda: mod.history_sums(A, C, dr, X, P, n_steps, mem, b2), repeat)
        outs[name] = np.concatenate([mem, b2])
    return {"kernel": "history_sums", "n": n_steps, "times": times, "outs": outs}


def bench_volterra(n_steps: int, repeat: int) -> dict:
    rng = np.random.default_rng(1)
    kern = np.exp(-0.01 * np.arange(n_steps + 1))
    alpha = 0.1 * rng.standard_normal(n_steps + 1)
    forcing = rng.standard_normal(n_steps + 1)
    acc = np.zeros(n_steps + 1)
    outs = {}
    times = {}
    for name, mod in (("python", _fallback), ("compiled", _core)):
        if mod is None:
            continue

        def run():
            y = np.zeros(n_steps + 1)
            y[0] = 1.0
            ytil = y.copy()
            state = np.array([0.0, alpha[0] * 0.0 + forcing[0]])
            mod.volterra_leaf(kern, alpha, forcing, y, ytil, acc, state, 0.01, -0.5, 0, n_steps + 1)
            outs[name] = y

        times[name] = _time(run, repeat)
    return {"kernel": "volterra_leaf", "n": n_steps, "times": times, "outs": outs}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 4000])
    args = ap.parse_args(argv)
    print(f"{'kernel':<15}{'n':>7}{'python [s]':>13}{'compiled [s]':>15}{'speed-up':>10}{'max diff':>11}")
    for n in args.sizes:
        for rep in (bench_history(n, args.repeat), bench_volterra(n, args.repeat)):
            tp = rep["times"].get("python", float("nan"))
            tc = rep["times"].get("compiled", float("nan"))
            if len(rep["outs"]) == 2:
                diff = float(np.max(np.abs(rep["outs"]["python"] - rep["outs"]["compiled"])))
            else:
                diff = float("nan")
            print(f"{rep['kernel']:<15}{n:>7}{tp:>13.4g}{tc:>15.4g}{tp / tc:>10.1f}{diff:>11.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
