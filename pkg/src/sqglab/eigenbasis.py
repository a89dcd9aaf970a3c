"""Dirichlet Laplacian eigenpairs on the square (0, pi)^2.

Modes are w(x, y) = (2/pi) sin(p x) sin(q y) with eigenvalue p^2 + q^2,
ordered by eigenvalue and then lexicographically on (p, q).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

NORM = 2.0 / math.pi
DOMAIN = (0.0, math.pi)


@dataclass(frozen=True)
class EigenMode:
    linear_index: int
    p: int
    q: int

    @property
    def multi_index(self) -> tuple[int, int]:
        return (self.p, self.q)

    @property
    def eigenvalue(self) -> int:
        return self.p * self.p + self.q * self.q


class EigenBasis:
    """The first ``M`` Dirichlet modes in canonical order.

    Instances are immutable; the integer arrays ``p``, ``q`` and ``lam``
    are read-only views shared by every consumer.
    """

    def __init__(self, pairs):
        pairs = [tuple(int(v) for v in pq) for pq in pairs]
        self.modes = tuple(EigenMode(j + 1, p, q) for j, (p, q) in enumerate(pairs))
        self.p = np.array([m.p for m in self.modes], dtype=np.int64)
        self.q = np.array([m.q for m in self.modes], dtype=np.int64)
        self.lam = self.p * self.p + self.q * self.q
        for arr in (self.p, self.q, self.lam):
            arr.flags.writeable = False
        self._index = {m.multi_index: m.linear_index - 1 for m in self.modes}

    def __len__(self) -> int:
        return len(self.modes)

    def __getitem__(self, j: int) -> EigenMode:
        return self.modes[j]

    def __iter__(self):
        return iter(self.modes)

    def __eq__(self, other) -> bool:
        return isinstance(other, EigenBasis) and self.pairs() == other.pairs()

    def __hash__(self) -> int:
        return hash(self.pairs())

    def __repr__(self) -> str:
        return f"EigenBasis(M={len(self)}, lam_max={int(self.lam[-1]) if len(self) else 0})"

    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(m.multi_index for m in self.modes)

    @property
    def max_p(self) -> int:
        return int(self.p.max())

    @property
    def max_q(self) -> int:
        return int(self.q.max())

    def index_of(self, p: int, q: int) -> int:
        """Zero-based position of mode (p, q); KeyError if absent."""
        return self._index[(p, q)]

    def truncate(self, m: int) -> "EigenBasis":
        if m > len(self):
            raise ValueError(f"cannot truncate basis of size {len(self)} to {m}")
        return build_basis(m)

    def is_prefix_of(self, other: "EigenBasis") -> bool:
        return len(self) <= len(other) and other.pairs()[: len(self)] == self.pairs()

    def weyl_constant(self, d: int = 2) -> float:
        """min_j lambda_j / j^(2/d) over the basis."""
        j = np.arange(1, len(self) + 1, dtype=float)
        return float(np.min(self.lam / j ** (2.0 / d)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "p", "q", "lambda"])
        for m in self.modes:
            w.writerow([m.linear_index, m.p, m.q, m.eigenvalue])
        return buf.getvalue()


def _enumerate_pairs(M: int) -> list[tuple[int, int]]:
    # grow the radius until the disc holds at least M lattice points
    r = max(2, int(math.ceil(math.sqrt(4.0 * M / math.pi))) + 2)
    while True:
        lam_cap = r * r
        cand = [(p * p + q * q, p, q) for p in range(1, r + 1) for q in range(1, r + 1)
                if p * p + q * q <= lam_cap]
        if len(cand) >= M:
            cand.sort()
            return [(p, q) for _, p, q in cand[:M]]
        r *= 2


@lru_cache(maxsize=64)
def build_basis(M: int) -> EigenBasis:
    """Return the first ``M`` modes, ascending in eigenvalue, ties by (p, q)."""
    if M < 1:
        raise ValueError(f"basis size must be >= 1, got {M}")
    return EigenBasis(_enumerate_pairs(M))


def basis_covering(lam_max: float) -> EigenBasis:
    """Smallest canonical basis containing every mode with eigenvalue <= lam_max."""
    count = sum(1 for p in range(1, int(math.isqrt(int(lam_max))) + 2)
                for q in range(1, int(math.isqrt(int(lam_max))) + 2)
                if p * p + q * q <= lam_max)
    return build_basis(max(count, 1))


def eval_mode(mode: EigenMode, x, y):
    """(2/pi) sin(p x) sin(q y) at the given points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return NORM * np.sin(mode.p * x) * np.sin(mode.q * y)


def eval_mode_gradient(mode: EigenMode, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = NORM * mode.p * np.cos(mode.p * x) * np.sin(mode.q * y)
    dy = NORM * mode.q * np.sin(mode.p * x) * np.cos(mode.q * y)
    return dx, dy


def eval_mode_laplacian(mode: EigenMode, x, y):
    """Laplacian from the second derivatives of the sine factors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dxx = -NORM * mode.p ** 2 * np.sin(mode.p * x) * np.sin(mode.q * y)
    dyy = -NORM * mode.q ** 2 * np.sin(mode.p * x) * np.sin(mode.q * y)
    return dxx + dyy


def distance_to_boundary(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.minimum(np.minimum(x, math.pi - x), np.minimum(y, math.pi - y))
