"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every criterion is read from the JSON manifest of the CLI subcommand that
computes it, run once with the default configuration.  Criteria whose
numbers are cheap to obtain are also recomputed directly here, both to time
them against their own budget and to confirm that the manifest reports the
same value.
"""

import math
import time

import pytest

from conftest import report
from tracerfriction import quad_core as qc
from tracerfriction.kernels import CouplingConstants, RadialPotential, eval_G, eval_M, eval_V
from tracerfriction.memory_kernel import invert_K_fourier

POT = RadialPotential()
C = CouplingConstants(1.0)
PI32 = math.pi**1.5


def _timed(fn):
    t0 = time.perf_counter()
    val = fn()
    return val, time.perf_counter() - t0


def test_ac01_fresnel(runs):
    val, sec = _timed(lambda: qc.gauss_oscillatory(None, -1j, 0))
    exact = math.sqrt(math.pi / 8)
    err = max(abs(val.real - exact), abs(val.imag - exact))
    doc = runs("kernels")["doc"]
    ok = err <= 1e-6 and sec < 1.0 and doc["results"]["fresnel_abs_error"] == err
    report("AC1", ok, f"Fresnel cos={val.real:.10f} sin={val.imag:.10f}, |err|={err:.2e} (tol 1e-6), "
                      f"{sec:.3f} s (budget 1 s)")
    assert ok


def test_ac02_correlation_asymptotes(runs):
    (m, v), sec = _timed(lambda: (eval_M(POT, 1e3), eval_V(POT, 1e3)))
    rm = m * 1e3**1.5 / (-2 * PI32)
    rv = v * 1e3**0.5 / (4 * PI32)
    res = runs("kernels")["doc"]["results"]
    table_ok = abs(res["M_asymptote_ratio"] - rm) < 1e-6 and abs(res["V_asymptote_ratio"] - rv) < 1e-6
    ok = 0.99 <= rm <= 1.01 and 0.99 <= rv <= 1.01 and sec < 5.0 and table_ok
    report("AC2", ok, f"t^1.5 M/(-2pi^1.5)={rm:.5f}, t^0.5 V/(4pi^1.5)={rv:.5f} at t=1e3 "
                      f"(band [0.99,1.01]); manifest agrees={table_ok}; {sec:.2f} s (budget 5 s)")
    assert ok


def test_ac03_small_k_law(runs):
    g, sec = _timed(lambda: eval_G(POT, 1e-4))
    lead = 2**1.5 * (1j - 1) * math.pi**2
    rel = abs(g / math.sqrt(1e-4) - lead) / abs(lead)
    res = runs("kernels")["doc"]["results"]
    ok = rel < 0.01 and sec < 5.0 and res["G_small_k_rel_error"] == rel
    report("AC3", ok, f"|G(k)/sqrt(k) - 2^1.5(i-1)pi^2|/|.| = {rel:.4%} at k=1e-4 (tol 1%); "
                      f"{sec:.2f} s (budget 5 s)")
    assert ok


def test_ac04_kernel(runs):
    run = runs("kernels")
    res = run["doc"]["results"]
    dev = res["K_fourier_max_abs_dev"]
    zk = res["ZK_sqrt_t_over_tail"]
    ok = (res["K0"] == 1.0 and dev <= 1e-4 and abs(zk - 1) <= 0.02 and run["seconds"] < 120)
    report("AC4", ok, f"K(0)={res['K0']!r} (exact 1), max|K_volterra-K_fourier| on [0.5,100]={dev:.2e} "
                      f"(tol 1e-4), Z K t^0.5/(pi^-2.5/4)={zk:.5f} at t=1e3 (tol 2%); "
                      f"kernels run {run['seconds']:.1f} s (budget 120 s)")
    assert ok


def test_ac05_causality(runs):
    vals, sec = _timed(lambda: [invert_K_fourier(POT, C, t) for t in (-1.0, -5.0)])
    res = runs("kernels")["doc"]["results"]
    same = [v for _, v in res["K_negative_times"]] == vals
    ok = all(abs(v) < 1e-4 for v in vals) and sec < 5.0 and same
    report("AC5", ok, f"|K(-1)|={abs(vals[0]):.2e}, |K(-5)|={abs(vals[1]):.2e} (tol 1e-4); "
                      f"{sec:.2f} s (budget 5 s)")
    assert ok


def test_ac06_convolution_gain(runs):
    run = runs("kernels")
    res = run["doc"]["results"]
    coarse, fine = res["conv_gain"]
    change = res["conv_gain_rel_change"]
    vanish = fine["I_sqrt_t_end"] < 0.5 * fine["I_sqrt_t_decade_before_end"]
    finite = math.isfinite(coarse["sup_gain"]) and math.isfinite(fine["sup_gain"])
    ok = finite and change <= 0.05 and vanish and run["seconds"] < 60
    report("AC6", ok, f"sup_[1,1e3] |I|(1+t)^1.5 = {coarse['sup_gain']:.5f} (h={coarse['step']}) / "
                      f"{fine['sup_gain']:.5f} (h={fine['step']}), change {change:.2e} (tol 5%); "
                      f"|I|t^0.5 {fine['I_sqrt_t_decade_before_end']:.2e} at t=100 -> "
                      f"{fine['I_sqrt_t_end']:.2e} at t=1e3 (decaying={vanish}); "
                      f"kernels run {run['seconds']:.1f} s (budget 60 s)")
    assert ok


def test_ac07_interval(runs):
    run = runs("interval")
    res = run["doc"]["results"]
    ok = (0.64 <= res["I_sup"] <= 0.68 and res["omega_split_max_dev"] <= 1e-8 and run["seconds"] < 30)
    report("AC7", ok, f"I_sup={res['I_sup']:.6f} (band [0.64,0.68]), bracket {res['I_bracket']}, "
                      f"max|Omega - pi(Omega1+Omega2)| over 50 delta = {res['omega_split_max_dev']:.1e} "
                      f"(tol 1e-8); {run['seconds']:.1f} s (budget 30 s)")
    assert ok


def test_ac08_best_decay(runs):
    run = runs("interval")
    res = run["doc"]["results"]
    ok = (0.15 < res["delta_star"] < 0.17 and res["delta_star_residual"] < 1e-9
          and res["best2_crossings"] == 0 and res["best2_margin"] >= 0.1 and run["seconds"] < 10)
    report("AC8", ok, f"delta*={res['delta_star']:.10f} in (0.15,0.17), residual "
                      f"{res['delta_star_residual']:.1e} (tol 1e-9); second equation: "
                      f"{res['best2_crossings']} sign changes on [0.01,0.49], margin "
                      f"{res['best2_margin']:.3f} (min 0.1); {run['seconds']:.1f} s (budget 10 s)")
    assert ok


def test_ac09_linear_decay(runs):
    run = runs("linear")
    res = run["doc"]["results"]
    ok = 1.05 <= res["exponent"] <= 1.30 and run["seconds"] < 300
    report("AC9", ok, f"fitted exponent on [1e2,1e3] = {res['exponent']:.4f} (band [1.05,1.30]; "
                      f"1+delta* = {res['one_plus_delta_star']:.4f}), r2={res['r2']:.6f}; "
                      f"{run['seconds']:.1f} s (budget 300 s)")
    assert ok


def test_ac10_contraction_audit(runs):
    run = runs("audit")
    by_T = run["doc"]["results"]["by_T"]
    a, b = by_T["100.0"], by_T["1000.0"]
    ok = (b["gamma1"] <= b["omega1"] + 0.1 and b["gamma3"] <= b["omega2"] + 0.1
          and b["gamma2"] <= 0.1 and b["gamma2"] < a["gamma2"] and run["seconds"] < 300)
    report("AC10", ok, f"T=1e3, delta=0.3: Gamma1={b['gamma1']:.4f} <= Omega1+0.1={b['omega1'] + 0.1:.4f}, "
                       f"Gamma3={b['gamma3']:.4f} <= Omega2+0.1={b['omega2'] + 0.1:.4f}, "
                       f"Gamma2={b['gamma2']:.2e} <= 0.1; Gamma2 T=1e2 {a['gamma2']:.2e} -> "
                       f"T=1e3 {b['gamma2']:.2e}; {run['seconds']:.1f} s (budget 300 s)")
    assert ok


def test_ac11_nonlinear_run(runs):
    run = runs("simulate")
    res = run["doc"]["results"]
    ok = (res["exponent"] >= 0.5 and math.isfinite(res["sup_weighted"])
          and res["sup_weighted_rel_change"] <= 0.05 and res["X_inf_uncertainty"] < 1e-3
          and run["seconds"] < 600)
    report("AC11", ok, f"exponent on [50,500] = {res['exponent']:.4f} (min 0.5; refined "
                       f"{res['exponent_refined']:.4f}); sup_(t>=1) |P|t^0.8 = {res['sup_weighted']:.6f} / "
                       f"{res['sup_weighted_refined']:.6f} at h/2, change {res['sup_weighted_rel_change']:.2e} "
                       f"(tol 5%); X_inf tail uncertainty {res['X_inf_uncertainty']:.2e} (tol 1e-3); "
                       f"{run['seconds']:.1f} s for both steps (budget 600 s)")
    assert ok


def test_ac12_fixed_point(runs):
    run = runs("fixed-point")
    res = run["doc"]["results"]
    ok = res["max_ratio"] < 1.0 and res["extrapolated_agreement"] <= 1e-4 and run["seconds"] < 600
    raw = ", ".join(f"{x:.2e}" for x in res["raw_agreement"])
    report("AC12", ok, f"T={res['T']}, max update ratio {res['max_ratio']:.3f} (< 1); relative gap to the "
                       f"direct solve on [T,500] after Richardson extrapolation "
                       f"{res['extrapolated_agreement']:.2e} (tol 1e-4; raw gaps at h, h/2: {raw}); "
                       f"{run['seconds']:.1f} s (budget 600 s)")
    assert ok


def test_ac13_oracle(runs):
    run = runs("oracle")
    res = run["doc"]["results"]
    v = run["doc"]["verdicts"]
    sp = res["splash_residuals"]
    ok = (res["free_norm_drift"] < 1e-13 and res["energy_drift"] < 1e-5
          and res["transverse_momentum_full3d"] < 1e-10 and res["transverse_force_full3d"] < 1e-10
          and v["splash_decreasing"] and res["deviation"] <= 0.01
          and res["deviation_shrink_factor"] >= 2.0 and run["seconds"] < 900)
    report("AC13", ok, f"free-field norm drift {res['free_norm_drift']:.1e} (round-off, tol 1e-13); "
                       f"energy drift {res['energy_drift']:.2e} (tol 1e-5); transverse momentum/force "
                       f"{res['transverse_momentum_full3d']:.1e}/{res['transverse_force_full3d']:.1e} "
                       f"(tol 1e-10); splash residual {sp[0]:.3f} -> {sp[-1]:.3f} (decreasing="
                       f"{v['splash_decreasing']}); deviation {res['deviation']:.2e} (tol 1e-2), refined "
                       f"{res['deviation_refined']:.2e}, shrink x{res['deviation_shrink_factor']:.2f} (min 2); "
                       f"{run['seconds']:.1f} s (budget 900 s)")
    assert ok


FULL_RERUN = ("kernels", "interval", "linear", "audit")
QUICK_TWICE = ("simulate", "fixed-point", "oracle")


def _files(run):
    return {p.name: p.read_bytes() for p in sorted(run["out"].iterdir())}


@pytest.mark.parametrize("sub", FULL_RERUN + QUICK_TWICE)
def test_ac14_determinism(runs, sub):
    quick = sub in QUICK_TWICE
    first = runs(sub, quick=quick)
    second = runs(sub, quick=quick, tag="repeat")
    a, b = _files(first), _files(second)
    ok = a == b and first["code"] == second["code"]
    mode = "quick config" if quick else "default config"
    report("AC14", ok, f"{sub} ({mode}): {len(a)} output files bit-identical across two runs = {a == b}")
    assert ok
