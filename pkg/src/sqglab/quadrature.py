"""Tensor Gauss-Legendre rules on the square and sampled grid fields."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def trig_degree(K: int) -> int:
    """Polynomial degree that a trig integrand of total frequency K behaves like
    on an interval of length pi, for Gauss-Legendre purposes.

    Calibrated so that sin(kx), cos(kx), k <= K integrate to < 1e-13 on [0, pi].
    """
    K = max(int(K), 0)
    return int(math.ceil(0.5 * math.pi * K + 8.0 * K ** (1.0 / 3.0) + 24))


def nodes_for_frequency(K: int) -> int:
    return (trig_degree(K) + 2) // 2


def exact_frequency(n: int) -> int:
    """Largest total frequency K integrated to round-off by n nodes."""
    K = 0
    while nodes_for_frequency(K + 1) <= n:
        K += 1
    return K


@lru_cache(maxsize=128)
def _gauss_legendre(n: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (b - a) * (x + 1.0) + a
    w = 0.5 * (b - a) * w
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@dataclass(frozen=True)
class TensorGrid:
    """Tensor-product grid on [0, pi]^2, optionally with quadrature weights."""

    x: np.ndarray
    y: np.ndarray
    wx: np.ndarray | None = None
    wy: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x.size, self.y.size)

    @property
    def is_quadrature(self) -> bool:
        return self.wx is not None

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def integrate(self, values) -> float:
        if not self.is_quadrature:
            raise ValueError("grid carries no quadrature weights")
        return float(self.wx @ np.asarray(values) @ self.wy)

    @property
    def exact_frequency(self) -> int:
        return exact_frequency(min(self.x.size, self.y.size))


def gauss_grid(n: int, ny: int | None = None) -> TensorGrid:
    x, wx = _gauss_legendre(int(n), 0.0, math.pi)
    y, wy = _gauss_legendre(int(ny or n), 0.0, math.pi)
    return TensorGrid(x, y, wx, wy)


def grid_for_frequency(K: int) -> TensorGrid:
    """Gauss grid exact (to round-off) for trig integrands of total frequency K."""
    return gauss_grid(nodes_for_frequency(K))


def uniform_grid(n: int, closed: bool = True) -> TensorGrid:
    if closed:
        x = np.linspace(0.0, math.pi, n)
    else:
        x = (np.arange(n) + 0.5) * math.pi / n
    return TensorGrid(x, x.copy())


@dataclass
class GridField:
    grid: TensorGrid
    values: np.ndarray

    def integral(self) -> float:
        return self.grid.integrate(self.values)

    def lp_norm(self, p: float) -> float:
        if math.isinf(p):
            return float(np.max(np.abs(self.values)))
        return self.grid.integrate(np.abs(self.values) ** p) ** (1.0 / p)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "value"])
        for i, xi in enumerate(self.grid.x):
            for k, yk in enumerate(self.grid.y):
                w.writerow([repr(float(xi)), repr(float(yk)), repr(float(self.values[i, k]))])
        return buf.getvalue()
