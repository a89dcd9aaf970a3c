import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqglab.eigenbasis import build_basis
from sqglab.quadrature import gauss_grid, grid_for_frequency, nodes_for_frequency
from sqglab.spectral import (
    BandwidthWarning, SpectralField, VelocityField, analyze, default_grid, dirichlet_energy, evaluate, evaluate_gradient,
    frac_apply, heat_apply, heat_defect, pad, project, random_field, sobolev_norm, synthesize,
    synthesize_gradient, velocity_at, velocity_from_theta,
)

seeds = st.integers(0, 2 ** 32 - 1)


@given(seeds, st.integers(1, 60))
@settings(max_examples=25, deadline=None)
def test_parseval(seed, m):
    f = random_field(build_basis(m), seed)
    total = float(f.coeffs @ f.coeffs)
    assert abs(sobolev_norm(f, 0) ** 2 - total) < 1e-14 * total


@given(seeds, st.sampled_from([0.5, 1.0, 1.5]))
@settings(max_examples=25, deadline=None)
def test_duality(seed, s):
    b = build_basis(30)
    f, g = random_field(b, seed), random_field(b, seed + 1)
    assert frac_apply(f, s).dot(g) == pytest.approx(f.dot(frac_apply(g, s)), rel=1e-13, abs=1e-15)


@given(seeds, st.floats(-1, 1), st.floats(-1, 1))
@settings(max_examples=25, deadline=None)
def test_composition(seed, a, b):
    f = random_field(build_basis(25), seed)
    lhs = frac_apply(frac_apply(f, a), b).coeffs
    rhs = frac_apply(f, a + b).coeffs
    assert np.allclose(lhs, rhs, rtol=4e-15, atol=0)


def test_frac_apply_range():
    f = random_field(build_basis(4), 0)
    with pytest.raises(ValueError):
        frac_apply(f, 2.5)


def test_frac_apply_on_a_mode():
    f = SpectralField.unit(build_basis(10), 2, 3)
    assert sobolev_norm(frac_apply(f, 1.0), 0) == pytest.approx(math.sqrt(13), rel=1e-15)


def test_synthesis_analysis_round_trip():
    f = random_field(build_basis(40), 3)
    g = default_grid(f, f)
    back = analyze(synthesize(f, g).values, f.basis, g)
    assert np.abs(back.coeffs - f.coeffs).max() < 1e-13


def test_analysis_of_callable_matches_sampled():
    b = build_basis(15)
    g = grid_for_frequency(30)
    fn = lambda X, Y: X * (math.pi - X) * np.sin(Y)  # noqa: E731
    X, Y = g.mesh()
    assert np.array_equal(analyze(fn, b, g, bandwidth=0).coeffs, analyze(fn(X, Y), b, g, bandwidth=0).coeffs)


def test_bandwidth_warning():
    b = build_basis(100)
    with pytest.warns(BandwidthWarning):
        analyze(np.zeros((8, 8)), b, gauss_grid(8))


def test_point_evaluation_matches_grid():
    f = random_field(build_basis(30), 5)
    g = gauss_grid(11)
    X, Y = g.mesh()
    assert np.allclose(evaluate(f, X, Y), synthesize(f, g).values, atol=1e-13)
    gx, gy = synthesize_gradient(f, g)
    ex, ey = evaluate_gradient(f, X, Y)
    assert np.allclose(ex, gx.values, atol=1e-12) and np.allclose(ey, gy.values, atol=1e-12)


def test_boundary_values_vanish():
    f = random_field(build_basis(30), 1)
    t = np.linspace(0, math.pi, 7)
    assert np.abs(evaluate(f, 0.0, t)).max() < 1e-14
    assert np.abs(evaluate(f, t, math.pi)).max() < 1e-14


def test_isometry_h1():
    f = random_field(build_basis(40), 2)
    assert dirichlet_energy(f) == pytest.approx(sobolev_norm(f, 1.0) ** 2, rel=1e-12)


@given(seeds)
@settings(max_examples=10, deadline=None)
def test_velocity_is_divergence_free(seed):
    th = random_field(build_basis(24), seed)
    K = max(th.basis.max_p, th.basis.max_q)
    g = gauss_grid(nodes_for_frequency(2 * K + 2))
    div = velocity_from_theta(th, g).divergence_coefficients(K + 1)
    assert np.abs(div).max() < 1e-12


def test_divergence_detects_a_source():
    # grad of a sine mode is not solenoidal
    f = SpectralField.unit(build_basis(5), 1, 2)
    g = gauss_grid(40)
    gx, gy = synthesize_gradient(f, g)
    div = VelocityField(gx, gy).divergence_coefficients(4)
    assert np.abs(div).max() > 0.1


def test_velocity_at_matches_grid():
    th = random_field(build_basis(20), 4)
    g = gauss_grid(9)
    X, Y = g.mesh()
    u = velocity_from_theta(th, g)
    ux, uy = velocity_at(th, X, Y)
    assert np.allclose(ux, u.ux.values, atol=1e-13) and np.allclose(uy, u.uy.values, atol=1e-13)


def test_project_and_pad():
    f = random_field(build_basis(30), 0)
    p = project(f, 10)
    assert np.array_equal(p.coeffs, f.coeffs[:10])
    q = pad(p, build_basis(30))
    assert np.array_equal(q.coeffs[:10], p.coeffs) and not q.coeffs[10:].any()
    with pytest.raises(ValueError):
        project(p, 20)


def test_heat_semigroup():
    f = random_field(build_basis(20), 0)
    a = heat_apply(heat_apply(f, 0.1), 0.2)
    assert np.allclose(a.coeffs, heat_apply(f, 0.3).coeffs, rtol=1e-14)
    d = heat_defect(f, 1e-9)
    assert np.allclose(d.coeffs, 1e-9 * f.basis.lam * f.coeffs, rtol=1e-6)


def test_mismatched_bases():
    with pytest.raises(ValueError):
        random_field(build_basis(3), 0) + random_field(build_basis(4), 0)
    with pytest.raises(ValueError):
        SpectralField(build_basis(3), np.zeros(4))


def test_csv_round_trip():
    f = random_field(build_basis(17), 9)
    g = SpectralField.from_csv(f.to_csv())
    assert g.basis == f.basis and np.array_equal(g.coeffs, f.coeffs)
    assert f.to_csv().splitlines()[1] == "j,coeff"


def test_random_field_is_seeded_and_normalized():
    a, b = random_field(build_basis(20), 7), random_field(build_basis(20), 7)
    assert np.array_equal(a.coeffs, b.coeffs)
    assert sobolev_norm(a, 0) == pytest.approx(1.0, rel=1e-15)


def test_no_warning_on_default_grid():
    f = random_field(build_basis(30), 0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", BandwidthWarning)
        analyze(synthesize(f, default_grid(f, f)).values, f.basis, default_grid(f, f))
