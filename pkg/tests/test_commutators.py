import math
import warnings

import numpy as np
import pytest

from sqglab.commutators import (
    OversamplingWarning, commutator_frac_grad_kernel, commutator_frac_grad_spectral,
    commutator_identity_residual, commutator_lambda_chi, diagonal_ladder, frac_grad_normalized, lp_norm,
    nonlinearity_weak_form,
)
from sqglab.eigenbasis import build_basis
from sqglab.spectral import SpectralField, random_field
from sqglab.testfunctions import TestFunction


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OversamplingWarning)
        yield


def test_identity_residual_decreases_with_M():
    psi = random_field(build_basis(6), 11)
    rel = [commutator_identity_residual(psi, TestFunction(), M).relative for M in (12, 24, 48)]
    assert rel[0] > rel[1] > rel[2]
    assert rel[2] < 1e-8


def test_identity_lhs_is_the_nonlinear_term():
    psi = random_field(build_basis(6), 2)
    res = commutator_identity_residual(psi, TestFunction(), 48)
    from sqglab.spectral import frac_apply
    assert res.lhs == pytest.approx(nonlinearity_weak_form(frac_apply(psi, 1.0), TestFunction()), rel=1e-10)


def test_lambda_chi_homogeneity():
    phi = TestFunction()
    psi = random_field(build_basis(8), 4)
    r1 = commutator_lambda_chi(phi, psi, 64)[1]
    r2 = commutator_lambda_chi(phi.scaled(3.0), psi * 0.5, 64)[1]
    assert r2.ratio == pytest.approx(r1.ratio, rel=1e-12)


def test_lambda_chi_commutes_with_constants_on_a_mode():
    # chi psi with psi = 0 gives zero
    psi = SpectralField(build_basis(4), np.zeros(4))
    out, rep = commutator_lambda_chi(TestFunction(), psi, 32)
    assert np.all(out.coeffs == 0) and rep.ratio == 0.0


def test_oversampling_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error", OversamplingWarning)
        with pytest.raises(OversamplingWarning):
            commutator_lambda_chi(TestFunction(), random_field(build_basis(16), 0), 32)


def test_kernel_and_spectral_routes_agree():
    psi = random_field(build_basis(6), 1)
    pts = np.array([[1.2, 1.6], [1.5, 1.5], [2.0, 1.1]])
    k = commutator_frac_grad_kernel(psi, 1.0, pts)
    s = commutator_frac_grad_spectral(psi, 1.0, pts)
    assert np.abs(k - s).max() < 1e-6 * np.abs(k).max()


def test_commutator_vanishes_for_free_translation_far_inside():
    # deep-interior value is much smaller than near-boundary value for a smooth mode
    e11 = SpectralField.unit(build_basis(1), 1, 1)
    _, mag, _ = frac_grad_normalized(e11, 1.0, diagonal_ladder(3))
    assert mag[0] < mag[2]


def test_points_must_be_interior():
    psi = random_field(build_basis(3), 0)
    with pytest.raises(ValueError):
        commutator_frac_grad_kernel(psi, 1.0, [[0.0, 1.0]])
    with pytest.raises(ValueError):
        commutator_frac_grad_kernel(psi, 2.0, [[1.0, 1.0]])


def test_lp_norm_of_a_mode():
    e11 = SpectralField.unit(build_basis(1), 1, 1)
    assert lp_norm(e11, 2) == pytest.approx(1.0, rel=1e-13)
    assert lp_norm(e11, math.inf) == pytest.approx(2 / math.pi, rel=1e-12)


def test_diagonal_ladder_halves():
    pts = diagonal_ladder(4)
    assert np.allclose(pts[:, 0], pts[:, 1])
    assert np.allclose(pts[1:, 0] / pts[:-1, 0], 0.5)
