import numpy as np
import pytest
from dataclasses import replace

from tracerfriction.dynamics import FieldInit, ParticleState
from tracerfriction.field_oracle import (
    OracleConfig,
    OracleGrid,
    ResolutionError,
    energy,
    force,
    init_field,
    propagate,
    run_oracle,
    splash_profile,
    step,
)
from tracerfriction.kernels import CouplingConstants, RadialPotential

POT = RadialPotential()
GRID = OracleGrid(t_resolved=5.0)


def test_free_propagation_is_unitary_and_exact():
    fld = init_field(FieldInit(), GRID, None)
    out = fld
    for _ in range(50):
        out = propagate(out, np.zeros(3), 0.1)
    assert abs(out.norm() - fld.norm()) <= 1e-14 * fld.norm()
    exact = fld.beta * np.exp(-0.5j * fld.k**2 * 5.0)
    assert np.max(np.abs(out.beta - exact)) < 1e-14


def test_norm_matches_closed_form():
    fi = FieldInit(A=0.02, w=0.8)
    fld = init_field(fi, GRID, POT)
    assert fld.norm() == pytest.approx(fi.l2_norm(), rel=1e-6)


def test_resolution_guards():
    with pytest.raises(ResolutionError):
        init_field(FieldInit(w=0.3), GRID, POT)
    with pytest.raises((ResolutionError, ValueError)):
        init_field(FieldInit(c=(0.5, 0.0, 0.0)), GRID, POT)


def test_axisymmetric_force_is_axial():
    fld = init_field(FieldInit(), GRID, POT)
    F = force(fld, np.array([0.0, 0.0, 0.4]), 1.0)
    assert F[0] == 0.0 and F[1] == 0.0
    assert F[2] != 0.0


def test_full3d_reduces_to_axisymmetric():
    g3 = replace(GRID, n_phi=8)
    a = init_field(FieldInit(), GRID, POT)
    b = init_field(FieldInit(), g3, POT)
    X = np.array([0.0, 0.0, 0.3])
    Fa, Fb = force(a, X, 1.0), force(b, X, 1.0)
    assert np.max(np.abs(Fb[:2])) < 1e-10
    assert abs(Fa[2] - Fb[2]) < 1e-10 * max(1.0, abs(Fa[2]))


def test_energy_conserved_short_run():
    cfg = OracleConfig(pot=POT, constants=CouplingConstants(1.0), horizon=5.0, step=0.01, grid=GRID)
    run = run_oracle(cfg)
    assert run.energy_drift() < 1e-5
    assert np.all(run.P[:, :2] == 0.0)
    assert run.meta["mode"] == "axisymmetric"


def test_single_step_matches_runner():
    cfg = OracleConfig(pot=POT, constants=CouplingConstants(1.0), horizon=0.02, step=0.01, grid=GRID)
    run = run_oracle(cfg)
    fld = init_field(cfg.field_init, GRID, POT)
    state = ParticleState(0.0, np.zeros(3), np.array(cfg.P0))
    for _ in range(2):
        fld, state, _ = step(fld, state, 0.01, 1.0)
    assert np.array_equal(state.P, run.P[-1])


def test_splash_profile_is_static_solution():
    # -2 W^ / k^2 is invariant under the driven propagation at rest
    fld = init_field(FieldInit(A=0.0), GRID, POT)
    fld.beta = splash_profile(fld, np.zeros(3))
    out = propagate(fld, np.zeros(3), 0.5)
    assert np.max(np.abs(out.beta - fld.beta)) < 1e-12 * np.max(np.abs(fld.beta))


def test_energy_of_rest_state():
    fld = init_field(FieldInit(A=0.0), GRID, POT)
    assert energy(fld, np.zeros(3), np.zeros(3), 1.0) == 0.0
