"""Commutators of the Dirichlet fractional Laplacian.

* ``[Lambda, chi] psi`` for a smooth multiplier chi,
* ``[Lambda^s, grad] psi(x)`` through the heat-kernel time integral,
* the commutator rewriting of the transport nonlinearity against a test
  function, with its residual.

Bound constants are reported, never assumed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .eigenbasis import NORM, build_basis, distance_to_boundary
from .heatkernel import (
    _gauss, compute_cs, image_count, log_time_rule, t_max_for,
    translation_defect,
)
from .quadrature import GridField, gauss_grid, nodes_for_frequency, uniform_grid
from .spectral import (
    SpectralField, analyze, evaluate, evaluate_gradient, frac_apply, heat_apply, sobolev_norm, synthesize, synthesize_gradient,
)
from .testfunctions import TestFunction


class OversamplingWarning(UserWarning):
    """The M-mode truncation does not resolve the product being analyzed."""


@dataclass
class CommutatorReport:
    tag: str
    input_id: str
    M: int
    measured: float
    normalizer: float
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.measured / self.normalizer if self.normalizer > 0 else 0.0

    def row(self) -> list:
        return [self.tag, self.input_id, self.M, repr(self.measured), repr(self.normalizer), repr(self.ratio)]


REPORT_HEADER = ["tag", "input_id", "M", "measured", "normalizer", "ratio"]


def resolution_nodes(M: int) -> int:
    """Quadrature nodes per axis at oversampling level M.

    At least exact for products of two M-band modes, and at least 2M so the
    non-band-limited test-function factors are resolved along with M.
    """
    basis = build_basis(M)
    return max(nodes_for_frequency(2 * max(basis.max_p, basis.max_q)), 2 * M)


def _band(f: SpectralField) -> int:
    return max(f.basis.max_p, f.basis.max_q)


# --------------------------------------------------------------- [Lambda, chi]

def commutator_lambda_chi(chi: TestFunction, psi: SpectralField, M: int,
                          p: float = 4.0, n: int | None = None):
    """[Lambda, chi] psi = Lambda(chi psi) - chi Lambda psi in the M-mode basis.

    Returns (field, report).  The report ratio is
    ||[Lambda, chi] psi||_{1/2,D} / (||chi||_{W^{2,p}} ||psi||_{1/2,D}).
    """
    basis = build_basis(M)
    if len(psi) > max(1, M // 4):
        warnings.warn(f"psi has {len(psi)} modes; oversampling M={M} is below 4x", OversamplingWarning,
                      stacklevel=2)
    g = chi.support_grid(n or resolution_nodes(M))
    X, Y = g.mesh()
    cv = chi.value(X, Y)
    pv = synthesize(psi, g).values
    lpv = synthesize(frac_apply(psi, 1.0), g).values
    prod = analyze(cv * pv, basis, g, bandwidth=0)
    tail = _tail_fraction(g.integrate((cv * pv) ** 2), prod)
    if tail > 1e-8:
        warnings.warn(f"M={M} truncation leaves a tail fraction {tail:.2e} of chi*psi", OversamplingWarning,
                      stacklevel=2)
    out = frac_apply(prod, 1.0) - analyze(cv * lpv, basis, g, bandwidth=0)
    measured = sobolev_norm(out, 0.5)
    normalizer = chi.sobolev_w2p(p) * sobolev_norm(psi, 0.5)
    rep = CommutatorReport("lambda_chi", f"modes={len(psi)}", M, measured, normalizer,
                           {"tail_fraction": tail, "p": p})
    return out, rep


def _tail_fraction(total_sq: float, f: SpectralField) -> float:
    if total_sq <= 0:
        return 0.0
    return math.sqrt(max(total_sq - float(f.coeffs @ f.coeffs), 0.0) / total_sq)


# --------------------------------------------------------------- [Lambda^s, grad]

def _graded_interval(n_per_panel: int = 16, levels: int = 22) -> tuple[np.ndarray, np.ndarray]:
    """Composite GL on [0, pi] with panels halving toward both endpoints."""
    h = 0.5 * math.pi
    left = [0.0] + [h * 2.0 ** (-k) for k in range(levels, -1, -1)]
    edges = np.array(left + [math.pi - e for e in reversed(left[:-1])])
    xg, wg = np.polynomial.legendre.leggauss(n_per_panel)
    a, b = edges[:-1, None], edges[1:, None]
    y = (0.5 * (b - a) * (xg + 1.0) + a).ravel()
    w = (0.5 * (b - a) * wg).ravel()
    return y, w


def _reflected_moments(x1: float, freqs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """A_p(x, t) = int_0^pi (d_x + d_y) h(x, y, t) sin(p y) dy for each t, p.

    After integrating by parts this is 2p sum_n int_0^pi G(x + y + 2 pi n, t) cos(p y) dy,
    the direct (translation-invariant) images having cancelled.
    """
    y, w = _graded_interval()
    cosm = np.cos(np.outer(y, freqs)) * w[:, None] * (2.0 * freqs)[None, :]
    out = np.empty((ts.size, freqs.size))
    for i, t in enumerate(ts):
        N = image_count(t)
        acc = np.zeros_like(y)
        for nn in range(-N, N + 1):
            acc += _gauss(x1 + y + 2 * math.pi * nn, t)
        out[i] = acc @ cosm
    return out


def lp_norm(psi, p: float, n_quad: int | None = None, n_sup: int = 513) -> float:
    """||psi||_{L^p}: Gauss quadrature for finite p, dense uniform sampling for p = inf."""
    if isinstance(psi, GridField):
        return psi.lp_norm(p)
    if math.isinf(p):
        return float(np.max(np.abs(synthesize(psi, uniform_grid(n_sup)).values)))
    g = gauss_grid(n_quad or nodes_for_frequency(int(math.ceil(p)) * _band(psi) + 4))
    return synthesize(psi, g).lp_norm(p)


def _time_rule_for(d_min: float, s: float, panels_per_decade: int = 4, order: int = 20):
    t_lo = d_min * d_min / 400.0  # below this the integrand is < exp(-100)
    return log_time_rule(t_lo, t_max_for(), panels_per_decade, order)


def commutator_frac_grad_kernel(psi, s: float, points) -> np.ndarray:
    """[Lambda^s, grad] psi at interior points via

        c_s int_0^inf t^{-1-s/2} int (grad_x + grad_y) H(x, y, t) psi(y) dy dt.

    ``psi`` is a SpectralField (separable, graded 1D quadrature) or a GridField
    on a Gauss grid (direct 2D quadrature; accurate only when d(x) is large
    compared with the grid spacing).  Returns an array (npoints, 2).
    """
    if not 0.0 < s < 2.0:
        raise ValueError(f"s={s} outside (0, 2)")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = distance_to_boundary(pts[:, 0], pts[:, 1])
    if np.any(d <= 0):
        raise ValueError("commutator sample points must be interior")
    c_s = compute_cs(s)
    a = 0.5 * s
    out = np.zeros((pts.shape[0], 2))
    for i, (x, di) in enumerate(zip(pts, d)):
        rule = _time_rule_for(float(di), s)
        tw = rule.w * rule.t ** (-1 - a)
        if isinstance(psi, SpectralField):
            out[i] = c_s * _kernel_integrand_spectral(psi, x, rule.t) @ tw
        else:
            out[i] = c_s * _kernel_integrand_grid(psi, x, rule.t) @ tw
    return out


def _kernel_integrand_spectral(psi: SpectralField, x, ts) -> np.ndarray:
    b = psi.basis
    c = psi.coeffs * NORM
    nz = c != 0
    pj, qj, cj = b.p[nz].astype(float), b.q[nz].astype(float), c[nz]
    if cj.size == 0:
        return np.zeros((2, ts.size))
    fp, ip = np.unique(pj, return_inverse=True)
    fq, iq = np.unique(qj, return_inverse=True)
    A1 = _reflected_moments(x[0], fp, ts)[:, ip]      # (T, J)
    A2 = _reflected_moments(x[1], fq, ts)[:, iq]
    heat_q = np.exp(-np.outer(ts, qj * qj)) * np.sin(qj * x[1])
    heat_p = np.exp(-np.outer(ts, pj * pj)) * np.sin(pj * x[0])
    comp1 = (A1 * heat_q) @ cj
    comp2 = (heat_p * A2) @ cj
    return np.vstack([comp1, comp2])


def _kernel_integrand_grid(psi: GridField, x, ts) -> np.ndarray:
    g = psi.grid
    X, Y = g.mesh()
    ys = np.stack([X, Y], axis=-1)
    wv = np.outer(g.wx, g.wy) * psi.values
    out = np.empty((2, ts.size))
    for i, t in enumerate(ts):
        v = translation_defect(np.broadcast_to(x, ys.shape), ys, t)
        out[:, i] = np.einsum("ijk,ij->k", v, wv)
    return out


def commutator_frac_grad_spectral(psi: SpectralField, s: float, points, t_lo: float | None = None) -> np.ndarray:
    """Spectral cross-check of [Lambda^s, grad] psi at deep-interior points.

    Uses c_s int t^{-1-s/2} (grad e^{t Delta} psi - e^{t Delta} grad psi) dt with
    grad psi re-analyzed in a sine basis large enough that exp(-lambda_M t_lo) is
    negligible.  The piece t < t_lo is dropped; it is exponentially small in
    d(x)^2 / t_lo because the two terms coincide there up to boundary images.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = float(distance_to_boundary(pts[:, 0], pts[:, 1]).min())
    t_lo = t_lo or d * d / 200.0
    lam_cut = 45.0 / t_lo
    big = build_basis(max(len(psi), int(math.pi / 4 * lam_cut) + 64))
    while big.lam[-1] < lam_cut:
        big = build_basis(2 * len(big))
    g = gauss_grid(nodes_for_frequency(max(big.max_p, big.max_q) + _band(psi)))
    gx, gy = synthesize_gradient(psi, g)
    dx = analyze(gx.values, big, g, bandwidth=_band(psi))
    dy = analyze(gy.values, big, g, bandwidth=_band(psi))
    rule = log_time_rule(t_lo, t_max_for(), 4, 20)
    a = 0.5 * s
    out = np.zeros((pts.shape[0], 2))
    for t, w in zip(rule.t, rule.w):
        wt = w * t ** (-1 - a)
        hp = heat_apply(psi, t)
        ex, ey = evaluate_gradient(hp, pts[:, 0], pts[:, 1])
        out[:, 0] += wt * (ex - evaluate(heat_apply(dx, t), pts[:, 0], pts[:, 1]))
        out[:, 1] += wt * (ey - evaluate(heat_apply(dy, t), pts[:, 0], pts[:, 1]))
    return compute_cs(s) * out


def frac_grad_normalized(psi, s: float, points, p: float = math.inf, dim: int = 2):
    """|[Lambda^s, grad] psi(x)| d(x)^{s+1+dim/p} / ||psi||_{L^p} per point.

    Returns (normalized, raw_magnitude, d).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = distance_to_boundary(pts[:, 0], pts[:, 1])
    vals = commutator_frac_grad_kernel(psi, s, pts)
    mag = np.linalg.norm(vals, axis=1)
    norm = lp_norm(psi, p)
    if norm == 0:
        return np.zeros_like(mag), mag, d
    expo = s + 1.0 + (0.0 if math.isinf(p) else dim / p)
    return mag * d ** expo / norm, mag, d


def diagonal_ladder(levels: int = 5, start: float = math.pi / 4) -> np.ndarray:
    """Points (r, r) with d(x) = r halving from ``start``."""
    r = start * 0.5 ** np.arange(levels)
    return np.stack([r, r], axis=1)


# --------------------------------------------------------------- nonlinearity

def nonlinearity_weak_form(theta: SpectralField, phi: TestFunction, n: int | None = None) -> float:
    """int theta (R_D^perp theta) . grad phi dx by quadrature on the support of phi."""
    g = phi.support_grid(n or max(128, nodes_for_frequency(2 * _band(theta))))
    X, Y = g.mesh()
    psi = frac_apply(theta, -1.0)
    px, py = synthesize_gradient(psi, g)
    tv = synthesize(theta, g).values
    fx, fy = phi.gradient(X, Y)
    return g.integrate(tv * (-py.values * fx + px.values * fy))


@dataclass
class IdentityResidual:
    lhs: float
    term_grad: float
    term_phi: float
    scale: float
    M: int
    tail_fraction: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.term_grad - self.term_phi)

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale > 0 else 0.0


def commutator_identity_residual(psi: SpectralField, phi: TestFunction, M: int,
                                 n: int | None = None) -> IdentityResidual:
    """Both sides of

        int theta u . grad phi = 1/2 int [Lambda, grad-perp] psi . grad phi psi
                                 - 1/2 int grad-perp psi . [Lambda, grad phi] psi

    with theta = Lambda psi, u = grad-perp psi.  Lambda acts on M-mode
    re-analyses of grad-perp psi and psi grad phi; the subtracted terms are
    evaluated pointwise.  All integrands carry a factor of phi or grad phi, so
    the quadrature runs over the support box of phi at resolution set by M.
    ``scale`` is the largest of the absolute-integrand masses of the three terms.
    """
    basis = build_basis(M)
    g = phi.support_grid(n or resolution_nodes(M))
    X, Y = g.mesh()
    theta = frac_apply(psi, 1.0)
    px, py = synthesize_gradient(psi, g)
    tx, ty = synthesize_gradient(theta, g)
    pv = synthesize(psi, g).values
    tv = synthesize(theta, g).values
    fx, fy = phi.gradient(X, Y)
    ux, uy = -py.values, px.values

    def lam_of(values):
        return synthesize(frac_apply(analyze(values, basis, g, bandwidth=0), 1.0), g).values

    # [Lambda, grad-perp] psi = Lambda(grad-perp psi) - grad-perp(Lambda psi)
    c1x = lam_of(ux) - (-ty.values)
    c1y = lam_of(uy) - tx.values
    # [Lambda, grad phi] psi = Lambda(psi grad phi) - grad phi Lambda psi
    prod_x, prod_y = pv * fx, pv * fy
    c2x = lam_of(prod_x) - fx * tv
    c2y = lam_of(prod_y) - fy * tv

    lhs_int = tv * (ux * fx + uy * fy)
    a_int = 0.5 * (c1x * fx + c1y * fy) * pv
    b_int = -0.5 * (ux * c2x + uy * c2y)
    lhs, ta, tb = g.integrate(lhs_int), g.integrate(a_int), g.integrate(b_int)
    scale = max(g.integrate(np.abs(lhs_int)), g.integrate(np.abs(a_int)), g.integrate(np.abs(b_int)))
    tot = g.integrate(prod_x ** 2 + prod_y ** 2)
    an = analyze(prod_x, basis, g, bandwidth=0), analyze(prod_y, basis, g, bandwidth=0)
    kept = float(an[0].coeffs @ an[0].coeffs + an[1].coeffs @ an[1].coeffs)
    tail = math.sqrt(max(tot - kept, 0.0) / tot) if tot > 0 else 0.0
    if tail > 1e-8:
        warnings.warn(f"M={M} leaves tail fraction {tail:.2e} of psi*grad(phi); "
                      "commutator fields are truncated", OversamplingWarning, stacklevel=2)
    return IdentityResidual(lhs, ta, tb, scale, M, tail)
