import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqglab.eigenbasis import build_basis
from sqglab.galerkin import (
    INTEGRATORS, ConvergenceError, GalerkinState, SimulationAborted, assemble_gamma, energy, hamiltonian,
    initial_condition, rhs, rhs_quadrature, run, step,
)
from sqglab.spectral import SpectralField, random_field


@given(st.integers(1, 24))
@settings(max_examples=12, deadline=None)
def test_tensor_symmetries(m):
    g = assemble_gamma(build_basis(m), m)
    G, T = g.dense(), g.dense_unnormalized()
    assert np.all(G == -G.transpose(0, 2, 1))
    idx = np.arange(m)
    assert np.all(G[idx, idx, :] == 0) and np.all(G[:, idx, idx] == 0)
    for perm in ((1, 0, 2), (0, 2, 1), (2, 1, 0)):
        assert np.all(T == -T.transpose(perm))


@pytest.mark.parametrize("m", [5, 12, 30])
def test_closed_form_matches_quadrature(m):
    b = build_basis(m)
    a, q = assemble_gamma(b, m, "closed_form"), assemble_gamma(b, m, "quadrature")
    assert np.abs(a.dense() - q.dense()).max() < 1e-12


def test_enumeration_order_does_not_change_the_tensor():
    b = build_basis(20)
    ref = assemble_gamma(b, 20)
    for seed in (1, 2, 3):
        other = assemble_gamma(b, 20, enumeration_seed=seed)
        assert np.array_equal(ref.values, other.values) and np.array_equal(ref.l, other.l)
        assert ref.to_csv() == other.to_csv()


def test_quadrature_rejects_inexact_rule():
    with pytest.raises(ValueError, match="not exact"):
        assemble_gamma(build_basis(10), 10, "quadrature", n_quad=4)


def test_unknown_assembly_method():
    with pytest.raises(ValueError, match="closed_form"):
        assemble_gamma(build_basis(4), 4, "fft")


@given(st.integers(0, 10 ** 6))
@settings(max_examples=10, deadline=None)
def test_rhs_matches_grid_computation(seed):
    th = random_field(build_basis(15), seed)
    g = assemble_gamma(th.basis, 15)
    a, b = rhs(th.coeffs, g), rhs_quadrature(th)
    assert np.abs(a - b).max() < 1e-12 * max(1.0, np.abs(a).max())


@given(st.integers(0, 10 ** 6))
@settings(max_examples=10, deadline=None)
def test_rhs_conserves_both_invariants(seed):
    th = random_field(build_basis(25), seed)
    f = rhs(th.coeffs, assemble_gamma(th.basis, 25))
    lam = th.basis.lam.astype(float)
    assert abs(th.coeffs @ f) < 1e-13 * np.abs(f).max()
    assert abs((th.coeffs / np.sqrt(lam)) @ f) < 1e-13 * np.abs(f).max()


def test_rhs_dimension_check():
    with pytest.raises(ValueError):
        rhs(np.zeros(3), assemble_gamma(build_basis(4), 4))


def test_implicit_midpoint_conserves_invariants():
    th, _ = initial_condition("random", 16, seed=3)
    tr = run(th, 2.0, 0.02, "implicit_midpoint", 10)
    assert tr.relative_drift("energy") < 1e-12 and tr.relative_drift("hamiltonian") < 1e-12


def test_single_mode_is_steady():
    th, _ = initial_condition((2, 1), 10)
    for integ in INTEGRATORS:
        tr = run(th, 1.0, 0.05, integ, 5)
        assert np.all(tr.snapshots == th.coeffs)


def test_rk4_converges_to_midpoint_solution():
    th, _ = initial_condition("random", 10, seed=1)
    g = assemble_gamma(th.basis, 10)
    a = run(th, 0.5, 1e-3, "rk4", 500, g).snapshots[-1]
    b = run(th, 0.5, 1e-3, "implicit_midpoint", 500, g).snapshots[-1]
    assert np.abs(a - b).max() < 1e-6


def test_unknown_integrator_names_valid_set():
    g = assemble_gamma(build_basis(3), 3)
    with pytest.raises(ValueError, match="rk4, implicit_midpoint"):
        step(GalerkinState(0.0, np.ones(3)), g, 0.1, "rk5")


def test_fixed_point_failure_raises():
    th = random_field(build_basis(10), 0) * 1e4
    with pytest.raises(ConvergenceError, match="reduce dt"):
        run(th, 1.0, 0.5, "implicit_midpoint", max_iter=5)


def test_blow_up_aborts_with_last_good_state():
    th = random_field(build_basis(20), 0) * 1e8
    with np.errstate(all="ignore"), pytest.raises(SimulationAborted) as exc:
        run(th, 100.0, 1.0, "rk4")
    assert np.all(np.isfinite(exc.value.last_good.theta))


def test_time_must_be_a_multiple_of_dt():
    th, _ = initial_condition("random", 4)
    with pytest.raises(ValueError, match="multiple"):
        run(th, 1.0, 0.3)
    with pytest.raises(ValueError):
        run(th, -1.0, 0.1)


def test_trajectory_csv_layout():
    th, _ = initial_condition("random", 4, seed=2)
    tr = run(th, 0.2, 0.05, sample_stride=2)
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == ["t", "energy", "hamiltonian", "theta_1", "theta_2", "theta_3", "theta_4"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 0.1, 0.2]
    assert float(rows[1][1]) == energy(th.coeffs)
    assert float(rows[1][2]) == hamiltonian(th.coeffs, th.basis)


def test_gamma_csv_layout():
    text = assemble_gamma(build_basis(6), 6).to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["j", "k", "l", "gamma"]
    assert all(1 <= int(v) <= 6 for r in rows[1:] for v in r[:3])


def test_initial_condition_projection():
    th, full = initial_condition("random", 8, seed=4, full_modes=64)
    assert len(full) == 64 and np.array_equal(th.coeffs, full.coeffs[:8])
    assert np.linalg.norm(full.coeffs) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        initial_condition(3.0, 4)


def test_initial_condition_from_callable():
    f = SpectralField.unit(build_basis(6), 2, 2)
    th, _ = initial_condition(lambda X, Y: 2 / np.pi * np.sin(2 * X) * np.sin(2 * Y), 6, full_modes=16)
    assert np.abs(th.coeffs - f.coeffs).max() < 1e-13
