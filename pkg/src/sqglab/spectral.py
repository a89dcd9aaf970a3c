"""Coefficient-space calculus in the Dirichlet eigenbasis.

A :class:`SpectralField` is a coefficient vector against an
:class:`~sqglab.eigenbasis.EigenBasis`.  Fractional powers, heat flow and
projections act diagonally on the coefficients; synthesis and analysis move
between coefficients and tensor grids using separable sine matrices.
"""

from __future__ import annotations

import csv
import io
import math
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .eigenbasis import NORM, EigenBasis, build_basis
from .quadrature import GridField, TensorGrid, grid_for_frequency


class BandwidthWarning(UserWarning):
    """Quadrature cannot integrate the requested products exactly."""


@dataclass
class SpectralField:
    basis: EigenBasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (len(self.basis),):
            raise ValueError(
                f"coefficient length {self.coeffs.shape} does not match basis size {len(self.basis)}")

    @classmethod
    def zeros(cls, basis: EigenBasis) -> "SpectralField":
        return cls(basis, np.zeros(len(basis)))

    @classmethod
    def unit(cls, basis: EigenBasis, p: int, q: int) -> "SpectralField":
        c = np.zeros(len(basis))
        c[basis.index_of(p, q)] = 1.0
        return cls(basis, c)

    def __len__(self) -> int:
        return len(self.basis)

    def _check(self, other: "SpectralField"):
        if other.basis != self.basis:
            raise ValueError("fields live on different bases; pad first")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, a: float):
        return SpectralField(self.basis, a * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.basis, -self.coeffs)

    def dot(self, other: "SpectralField") -> float:
        """L2 pairing, computed in coefficient space."""
        n = min(len(self), len(other))
        if self.basis.pairs()[:n] != other.basis.pairs()[:n]:
            raise ValueError("bases are not nested")
        return float(self.coeffs[:n] @ other.coeffs[:n])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# basis M={len(self.basis)} domain=(0,pi)^2 dirichlet\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "coeff"])
        for j, c in enumerate(self.coeffs, start=1):
            w.writerow([j, repr(float(c))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SpectralField":
        lines = text.splitlines()
        match = re.search(r"M=(\d+)", lines[0])
        if not lines[0].startswith("#") or match is None:
            raise ValueError("missing basis header line")
        basis = build_basis(int(match.group(1)))
        coeffs = np.zeros(len(basis))
        rows = csv.reader(lines[1:])
        header = next(rows)
        if header != ["j", "coeff"]:
            raise ValueError(f"unexpected header {header}")
        for j, c in rows:
            coeffs[int(j) - 1] = float(c)
        return cls(basis, coeffs)


# ---------------------------------------------------------------- diagonal ops

def frac_apply(f: SpectralField, s: float) -> SpectralField:
    """Lambda^s f: multiply coefficient j by lambda_j^(s/2)."""
    if not -2.0 <= s <= 2.0:
        raise ValueError(f"fractional order s={s} outside [-2, 2]")
    return SpectralField(f.basis, f.coeffs * f.basis.lam.astype(float) ** (0.5 * s))


def sobolev_norm(f: SpectralField, s: float) -> float:
    """The D(Lambda^s) norm (sum_j lambda_j^s f_j^2)^(1/2)."""
    w = f.basis.lam.astype(float) ** s
    return float(math.sqrt(np.sum(w * f.coeffs ** 2)))


def project(f: SpectralField, m: int) -> SpectralField:
    """P_m: keep the first m coefficients (returned on the m-mode basis)."""
    if m > len(f):
        raise ValueError(f"m={m} exceeds field length {len(f)}")
    return SpectralField(build_basis(m), f.coeffs[:m].copy())


def pad(f: SpectralField, basis: EigenBasis) -> SpectralField:
    """Embed f into a larger nested basis with zero coefficients."""
    if not f.basis.is_prefix_of(basis):
        raise ValueError("target basis does not extend the field's basis")
    c = np.zeros(len(basis))
    c[: len(f)] = f.coeffs
    return SpectralField(basis, c)


def heat_apply(f: SpectralField, t: float) -> SpectralField:
    """e^{t Delta} f: multiply coefficient j by exp(-lambda_j t)."""
    if t < 0:
        raise ValueError("heat time must be nonnegative")
    return SpectralField(f.basis, f.coeffs * np.exp(-f.basis.lam * float(t)))


def heat_defect(f: SpectralField, t: float) -> SpectralField:
    """(I - e^{t Delta}) f, via expm1 so small t keeps full precision."""
    return SpectralField(f.basis, -np.expm1(-f.basis.lam * float(t)) * f.coeffs)


# ---------------------------------------------------------------- synthesis

def _sin_matrix(P: int, x: np.ndarray) -> np.ndarray:
    return np.sin(np.outer(np.arange(1, P + 1), x))


def _cos_matrix(P: int, x: np.ndarray, start: int = 1) -> np.ndarray:
    return np.cos(np.outer(np.arange(start, P + 1), x))


def coefficient_table(f: SpectralField) -> np.ndarray:
    """Dense (max_p, max_q) table holding NORM * f_j at [p-1, q-1]."""
    C = np.zeros((f.basis.max_p, f.basis.max_q))
    C[f.basis.p - 1, f.basis.q - 1] = NORM * f.coeffs
    return C


def synthesize(f: SpectralField, grid: TensorGrid) -> GridField:
    C = coefficient_table(f)
    Sx = _sin_matrix(C.shape[0], grid.x)
    Sy = _sin_matrix(C.shape[1], grid.y)
    return GridField(grid, Sx.T @ C @ Sy)


def synthesize_gradient(f: SpectralField, grid: TensorGrid) -> tuple[GridField, GridField]:
    C = coefficient_table(f)
    P, Q = C.shape
    Sx, Sy = _sin_matrix(P, grid.x), _sin_matrix(Q, grid.y)
    Cx, Cy = _cos_matrix(P, grid.x), _cos_matrix(Q, grid.y)
    pw = np.arange(1, P + 1)[:, None]
    qw = np.arange(1, Q + 1)[None, :]
    gx = Cx.T @ (pw * C) @ Sy
    gy = Sx.T @ (qw * C) @ Cy
    return GridField(grid, gx), GridField(grid, gy)


def evaluate(f: SpectralField, x, y) -> np.ndarray:
    """Point evaluation at arbitrary (broadcastable) coordinates."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    sx = np.sin(np.multiply.outer(x, f.basis.p))
    sy = np.sin(np.multiply.outer(y, f.basis.q))
    return NORM * (sx * sy) @ f.coeffs


def evaluate_gradient(f: SpectralField, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    px, qy = np.multiply.outer(x, f.basis.p), np.multiply.outer(y, f.basis.q)
    gx = NORM * (np.cos(px) * np.sin(qy)) @ (f.basis.p * f.coeffs)
    gy = NORM * (np.sin(px) * np.cos(qy)) @ (f.basis.q * f.coeffs)
    return gx, gy


def analyze(values, basis: EigenBasis, grid: TensorGrid, bandwidth: int | None = None) -> SpectralField:
    """Coefficients f_j = int f w_j dx by tensor quadrature.

    ``values`` is either an array sampled on ``grid`` or a callable
    ``values(X, Y)``.  ``bandwidth`` is the largest 1D frequency present in
    the sampled field (default: that of the basis).  A :class:`BandwidthWarning`
    is issued when the quadrature cannot integrate field-times-mode products
    exactly.
    """
    if not grid.is_quadrature:
        raise ValueError("analysis needs a quadrature grid")
    if callable(values):
        X, Y = grid.mesh()
        values = values(X, Y)
    values = np.asarray(values, dtype=float)
    K = max(basis.max_p, basis.max_q)
    band = K if bandwidth is None else int(bandwidth)
    if band + K > grid.exact_frequency:
        warnings.warn(
            f"analysis to M={len(basis)} (max frequency {K}) with field bandwidth {band} "
            f"exceeds quadrature exactness {grid.exact_frequency}", BandwidthWarning, stacklevel=2)
    Sx = _sin_matrix(basis.max_p, grid.x) * grid.wx
    Sy = _sin_matrix(basis.max_q, grid.y) * grid.wy
    A = Sx @ values @ Sy.T
    return SpectralField(basis, NORM * A[basis.p - 1, basis.q - 1])


def default_grid(*fields: SpectralField, extra: int = 0) -> TensorGrid:
    """Quadrature grid exact for pairwise products of the given fields."""
    K = sum(max(f.basis.max_p, f.basis.max_q) for f in fields) + extra
    return grid_for_frequency(K)


# ---------------------------------------------------------------- velocity

@dataclass
class VelocityField:
    ux: GridField
    uy: GridField

    def divergence_coefficients(self, max_freq: int) -> np.ndarray:
        """Spectral divergence of the sampled velocity.

        u_x is analyzed against sin(px)cos(qy), u_y against cos(px)sin(qy);
        the divergence coefficient on cos(px)cos(qy) is p a_pq + q b_pq.
        """
        g = self.ux.grid
        K = max_freq
        sx = _sin_matrix(K, g.x) * g.wx
        cy = _cos_matrix(K, g.y, start=0) * g.wy
        cx = _cos_matrix(K, g.x, start=0) * g.wx
        sy = _sin_matrix(K, g.y) * g.wy
        cos_norm = np.full(K + 1, 0.5 * math.pi)
        cos_norm[0] = math.pi
        sin_norm = np.full(K, 0.5 * math.pi)
        a = (sx @ self.ux.values @ cy.T) / np.outer(sin_norm, cos_norm)  # (p>=1, q>=0)
        b = (cx @ self.uy.values @ sy.T) / np.outer(cos_norm, sin_norm)  # (p>=0, q>=1)
        div = np.zeros((K + 1, K + 1))
        div[1:, :] += np.arange(1, K + 1)[:, None] * a
        div[:, 1:] += np.arange(1, K + 1)[None, :] * b
        return div


def streamfunction(theta: SpectralField) -> SpectralField:
    """psi = Lambda^{-1} theta."""
    return frac_apply(theta, -1.0)


def velocity_from_theta(theta: SpectralField, grid: TensorGrid) -> VelocityField:
    """u = grad-perp Lambda^{-1} theta = (-d_y psi, d_x psi) on the grid."""
    gx, gy = synthesize_gradient(streamfunction(theta), grid)
    return VelocityField(GridField(grid, -gy.values), GridField(grid, gx.values))


def velocity_at(theta: SpectralField, x, y):
    gx, gy = evaluate_gradient(streamfunction(theta), x, y)
    return -gy, gx


def dirichlet_energy(f: SpectralField, grid: TensorGrid | None = None) -> float:
    """int |grad f|^2 by quadrature (compare with sobolev_norm(f, 1)**2)."""
    grid = grid or default_grid(f, f)
    gx, gy = synthesize_gradient(f, grid)
    return grid.integrate(gx.values ** 2 + gy.values ** 2)


def random_field(basis: EigenBasis, seed: int, beta: float = 1.0, norm: float = 1.0) -> SpectralField:
    """theta_j = z_j lambda_j^(-beta), z_j standard normal, scaled to the given L2 norm."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(len(basis)) * basis.lam.astype(float) ** (-beta)
    nrm = float(np.linalg.norm(c))
    return SpectralField(basis, c * (norm / nrm if nrm > 0 else 0.0))
