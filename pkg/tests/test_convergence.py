import csv
import io
import math
import warnings

import numpy as np
import pytest

from sqglab.convergence import (
    STUDY_HEADER, TailWarning, cauchy_diagnostic, hamiltonian_constancy, initial_hamiltonian_gap,
    merged_difference_norm, padding_consistency, projection_decay, run_study, stream_tendency, study_csv,
    weak_residual,
)
from sqglab.eigenbasis import build_basis
from sqglab.galerkin import assemble_gamma, initial_condition, run
from sqglab.spectral import random_field, sobolev_norm
from sqglab.testfunctions import TestFunction, TimeBump


@pytest.fixture(scope="module")
def study():
    return run_study((4, 8, 16), T=0.5, dt=0.05, stride=2)


def test_projection_decay_is_fast():
    t = projection_decay(TestFunction(), k=1.0, ladder=(16, 64, 256))
    assert t.strictly_decreasing and t.superalgebraic and t.coefficients_bounded
    assert t.tail_fraction < 1e-10


def test_projection_decay_warns_on_short_analysis():
    with pytest.warns(TailWarning):
        projection_decay(TestFunction(), k=0, ladder=(16, 64), analysis_modes=256)
    with pytest.raises(ValueError):
        projection_decay(TestFunction(), ladder=(16, 64), analysis_modes=64)


def test_weak_residual_is_linear_in_phi():
    th, _ = initial_condition("random", 8, seed=5)
    tr = run(th, 1.0, 0.02, "implicit_midpoint", 5)
    phi = TestFunction()
    a, b = weak_residual(tr, phi), weak_residual(tr, phi.scaled(-2.0))
    size = abs(a.time_term) + abs(a.transport_term)
    assert abs(b.value + 2.0 * a.value) < 1e-13 * size


def test_weak_residual_shrinks_with_the_step():
    th, _ = initial_condition("random", 8, seed=5)
    g = assemble_gamma(th.basis, 8)
    r = [weak_residual(run(th, 1.0, dt, "implicit_midpoint", 2, g), TestFunction()).magnitude
         for dt in (0.02, 0.01, 0.005)]
    assert r[0] > r[1] > r[2]


def test_weak_residual_projection_gap_within_bound():
    th, _ = initial_condition("random", 16, seed=1)
    tr = run(th, 1.0, 0.02, "implicit_midpoint", 5)
    w = weak_residual(tr, TestFunction(), TimeBump(0.0, 1.0))
    assert w.projection_gap <= w.projection_bound


def test_weak_residual_needs_snapshots():
    th, _ = initial_condition("random", 4)
    tr = run(th, 0.1, 0.05, keep_snapshots=False)
    with pytest.raises(ValueError):
        weak_residual(tr, TestFunction())


def test_padding_and_merged_norms_agree(study):
    assert padding_consistency(study) == 0.0


def test_merged_norm_on_different_bases():
    a, b = random_field(build_basis(5), 0), random_field(build_basis(9), 1)
    assert merged_difference_norm(b, b, 0.5) == 0.0
    tail = math.sqrt(float(np.sum(b.basis.lam[5:] ** 0.5 * b.coeffs[5:] ** 2)))
    head = math.sqrt(float(np.sum(b.basis.lam[:5] ** 0.5 * (b.coeffs[:5] - a.coeffs) ** 2)))
    assert merged_difference_norm(b, a, 0.5) == pytest.approx(math.hypot(head, tail), rel=1e-14)
    assert merged_difference_norm(a, a * 0.0, 1.0) == pytest.approx(sobolev_norm(a, 1.0), rel=1e-15)


def test_cauchy_differences_shrink(study):
    rows = cauchy_diagnostic(study)
    assert [(r.m_coarse, r.m_fine) for r in rows] == [(4, 8), (8, 16)]
    assert all(r.sup_difference > 0 for r in rows)


def test_cauchy_requires_shared_times(study):
    other = run_study((4, 8), T=0.5, dt=0.05, stride=5)
    other.trajectories[8] = study.trajectories[8]
    with pytest.raises(ValueError, match="sample times"):
        cauchy_diagnostic(other)


def test_invariant_diagnostics(study):
    gaps = initial_hamiltonian_gap(study)
    assert gaps[4] >= gaps[8] >= gaps[16] >= 0
    assert max(hamiltonian_constancy(study).values()) < 1e-11


def test_stream_tendency_two_ways():
    th = random_field(build_basis(12), 7)
    st = stream_tendency(th, assemble_gamma(th.basis, 12), TestFunction())
    assert st.spectral == pytest.approx(st.flux, rel=1e-10, abs=1e-14)


def test_study_csv(study):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        text = study_csv(study, phi=TestFunction())
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == STUDY_HEADER
    kinds = {r[1] for r in rows[1:]}
    assert {"energy", "hamiltonian", "cauchy_eps0.25", "H0_gap", "H_drift", "tendency_ratio"} <= kinds


def test_study_is_independent_of_thread_count():
    a = run_study((4, 8, 16), T=0.2, dt=0.05, stride=1, threads=1)
    b = run_study((4, 8, 16), T=0.2, dt=0.05, stride=1, threads=3)
    assert study_csv(a) == study_csv(b)
    for m in a.ladder:
        assert np.array_equal(a.trajectories[m].snapshots, b.trajectories[m].snapshots)
