"""Closed-form smooth compactly supported test functions on the square."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigenbasis import EigenBasis
from .quadrature import TensorGrid
from .spectral import SpectralField, analyze


def _bump_1d(z, center: float, rho: float):
    """b(z) = exp(-1/(1-r^2)), r = (z - center)/rho, with first and second derivatives."""
    z = np.asarray(z, dtype=float)
    r = (z - center) / rho
    inside = np.abs(r) < 1.0
    ri = np.where(inside, r, 0.0)
    den = 1.0 - ri * ri
    b = np.where(inside, np.exp(-1.0 / den), 0.0)
    g1 = -2.0 * ri / den ** 2
    g2 = -2.0 / den ** 2 - 8.0 * ri * ri / den ** 3
    db = np.where(inside, g1 * b / rho, 0.0)
    d2b = np.where(inside, (g2 + g1 * g1) * b / rho ** 2, 0.0)
    return b, db, d2b


def bump_derivatives(z, center: float, rho: float, order: int) -> list[np.ndarray]:
    """[b, b', ..., b^(order)] of the 1D bump, in z.

    Uses b = exp(g), g(r) = -1/(1-r^2) = -(1/(1-r) + 1/(1+r))/2, whose
    derivatives are closed form, and b^(n) = sum_k C(n-1, k) g^(k+1) b^(n-1-k).
    """
    z = np.asarray(z, dtype=float)
    r = (z - center) / rho
    inside = np.abs(r) < 1.0
    ri = np.where(inside, r, 0.0)
    g = []
    for k in range(1, order + 1):
        fk = math.factorial(k)
        g.append(-0.5 * (fk / (1.0 - ri) ** (k + 1) + (-1) ** k * fk / (1.0 + ri) ** (k + 1)))
    b = [np.where(inside, np.exp(-1.0 / (1.0 - ri * ri)), 0.0)]
    for n in range(1, order + 1):
        acc = np.zeros_like(ri)
        for k in range(n):
            acc = acc + math.comb(n - 1, k) * g[k] * b[n - 1 - k]
        b.append(acc)
    return [np.where(inside, bn / rho ** n, 0.0) for n, bn in enumerate(b)]


@dataclass(frozen=True)
class TestFunction:
    """phi(x, y) = amplitude * b(x) b(y), a product bump of radius ``rho``."""

    __test__ = False  # not a pytest class

    rho: float = math.pi / 3
    center: tuple[float, float] = (math.pi / 2, math.pi / 2)
    amplitude: float = 1.0

    def __post_init__(self):
        if self.support_margin <= 0:
            raise ValueError("test function support must stay inside the open square")

    @property
    def support_margin(self) -> float:
        cx, cy = self.center
        return min(cx - self.rho, math.pi - cx - self.rho, cy - self.rho, math.pi - cy - self.rho)

    def scaled(self, a: float) -> "TestFunction":
        return TestFunction(self.rho, self.center, self.amplitude * a)

    def value(self, x, y):
        bx, _, _ = _bump_1d(x, self.center[0], self.rho)
        by, _, _ = _bump_1d(y, self.center[1], self.rho)
        return self.amplitude * bx * by

    def gradient(self, x, y):
        bx, dbx, _ = _bump_1d(x, self.center[0], self.rho)
        by, dby, _ = _bump_1d(y, self.center[1], self.rho)
        return self.amplitude * dbx * by, self.amplitude * bx * dby

    def hessian(self, x, y):
        bx, dbx, d2bx = _bump_1d(x, self.center[0], self.rho)
        by, dby, d2by = _bump_1d(y, self.center[1], self.rho)
        a = self.amplitude
        return a * d2bx * by, a * dbx * dby, a * bx * d2by

    def support_grid(self, n: int = 64) -> TensorGrid:
        """Gauss grid restricted to the support box (integrand vanishes outside)."""
        x, wx = np.polynomial.legendre.leggauss(n)
        cx, cy = self.center
        return TensorGrid(cx + self.rho * x, cy + self.rho * x, self.rho * wx, self.rho * wx)

    def sobolev_w2p(self, p: float = 4.0, n: int = 96) -> float:
        """W^{2,p} norm: (sum over |alpha| <= 2 of int |d^alpha phi|^p)^(1/p)."""
        g = self.support_grid(n)
        X, Y = g.mesh()
        parts = [self.value(X, Y), *self.gradient(X, Y)]
        hxx, hxy, hyy = self.hessian(X, Y)
        parts += [hxx, hxy, hxy, hyy]
        return sum(g.integrate(np.abs(v) ** p) for v in parts) ** (1.0 / p)

    def laplacian_power_norm(self, N: int, n: int = 256) -> float:
        """||Delta^N phi||_{L^2} by quadrature of the closed-form derivatives."""
        g = self.support_grid(n)
        bx = bump_derivatives(g.x, self.center[0], self.rho, 2 * N)
        by = bump_derivatives(g.y, self.center[1], self.rho, 2 * N)
        lap = np.zeros((g.x.size, g.y.size))
        for i in range(N + 1):
            lap += math.comb(N, i) * np.outer(bx[2 * i], by[2 * (N - i)])
        return abs(self.amplitude) * math.sqrt(g.integrate(lap ** 2))

    def l2_norm(self, n: int = 96) -> float:
        g = self.support_grid(n)
        X, Y = g.mesh()
        return math.sqrt(g.integrate(self.value(X, Y) ** 2))

    def analyze(self, basis: EigenBasis, n: int | None = None) -> SpectralField:
        """Eigen-coefficients phi_j by Gauss quadrature on the support box."""
        n = n or max(256, 8 * max(basis.max_p, basis.max_q))
        return analyze(self.value, basis, self.support_grid(n), bandwidth=0)


@dataclass(frozen=True)
class TimeBump:
    """sigma(t) = exp(-1/(1-r^2)) on (t0, t1), r mapped to (-1, 1)."""

    t0: float
    t1: float

    def __call__(self, t):
        c, rho = 0.5 * (self.t0 + self.t1), 0.5 * (self.t1 - self.t0)
        return _bump_1d(t, c, rho)[0]

    def derivative(self, t):
        c, rho = 0.5 * (self.t0 + self.t1), 0.5 * (self.t1 - self.t0)
        return _bump_1d(t, c, rho)[1]
