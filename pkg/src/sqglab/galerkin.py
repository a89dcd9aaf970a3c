"""Galerkin truncation of inviscid SQG in the Dirichlet eigenbasis.

The m-mode system is

    d theta_l / dt + sum_{j,k} gamma_{jkl} theta_j theta_k = 0,
    gamma_{jkl} = lambda_j^{-1/2} int (grad-perp w_j . grad w_k) w_l dx,

and conserves E = 1/2 sum theta_j^2 and H = 1/2 sum lambda_j^{-1/2} theta_j^2.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .eigenbasis import NORM, EigenBasis, build_basis
from .quadrature import exact_frequency, gauss_grid, nodes_for_frequency
from .spectral import (
    SpectralField, _cos_matrix, _sin_matrix, analyze, project, random_field, synthesize_gradient, velocity_from_theta,
)

log = logging.getLogger(__name__)

INTEGRATORS = ("rk4", "implicit_midpoint")


class ConvergenceError(RuntimeError):
    """Implicit midpoint fixed-point iteration did not converge."""


class SimulationAborted(RuntimeError):
    """Non-finite state encountered; ``last_good`` holds the previous state."""

    def __init__(self, msg, last_good: "GalerkinState"):
        super().__init__(msg)
        self.last_good = last_good


# ------------------------------------------------------------------ tensor

def _delta_comb(a, b, c):
    """Integer pattern of int_0^pi cos(a x) sin(b x) sin(c x) dx in units of pi/4."""
    return ((a == b - c).astype(np.int64) + (a == c - b).astype(np.int64)
            - (a == b + c).astype(np.int64))


def _triad_integer(pj, qj, pk, qk, pl, ql):
    """lambda_j^{1/2} gamma_{jkl} * 2 pi, an integer."""
    return (-qj * pk * _delta_comb(pk, pj, pl) * _delta_comb(qj, qk, ql)
            + pj * qk * _delta_comb(pj, pk, pl) * _delta_comb(qk, qj, ql))


@dataclass
class CouplingTensor:
    """Sparse gamma_{jkl} in COO form, sorted by (l, j, k); indices zero-based."""

    m: int
    j: np.ndarray
    k: np.ndarray
    l: np.ndarray
    values: np.ndarray
    method: str
    triad_int: np.ndarray | None = None  # 2 pi lambda_j^{1/2} gamma (closed form only)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def basis(self) -> EigenBasis:
        return build_basis(self.m)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.m, self.m))
        out[self.j, self.k, self.l] = self.values
        return out

    def unnormalized(self) -> np.ndarray:
        """T_{jkl} = lambda_j^{1/2} gamma_{jkl} for the stored entries."""
        if self.triad_int is not None:
            return self.triad_int / (2.0 * math.pi)
        return self.values * np.sqrt(self.basis.lam[self.j].astype(float))

    def dense_unnormalized(self) -> np.ndarray:
        out = np.zeros((self.m, self.m, self.m))
        out[self.j, self.k, self.l] = self.unnormalized()
        return out

    def by_l(self) -> dict[int, list[tuple[int, int, float]]]:
        out: dict[int, list] = {}
        for j, k, l, v in zip(self.j, self.k, self.l, self.values):
            out.setdefault(int(l), []).append((int(j), int(k), float(v)))
        return out

    def contract(self, theta: np.ndarray) -> np.ndarray:
        """sum_{j,k} gamma_{jkl} theta_j theta_k for every l (fixed summation order)."""
        w = self.values * theta[self.j] * theta[self.k]
        return np.bincount(self.l, weights=w, minlength=self.m)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["j", "k", "l", "gamma"])
        for j, k, l, v in zip(self.j, self.k, self.l, self.values):
            wr.writerow([int(j) + 1, int(k) + 1, int(l) + 1, repr(float(v))])
        return buf.getvalue()


def _canonical(m, j, k, l, v, method, ints=None) -> CouplingTensor:
    keep = v != 0
    j, k, l, v = j[keep], k[keep], l[keep], v[keep]
    order = np.lexsort((k, j, l))
    if ints is not None:
        ints = ints[keep][order]
    return CouplingTensor(m, j[order], k[order], l[order], v[order], method, ints)


def assemble_gamma(basis: EigenBasis, m: int, method: str = "closed_form",
                   n_quad: int | None = None, enumeration_seed: int | None = None) -> CouplingTensor:
    """Coupling tensor of the m-mode Galerkin system.

    ``closed_form`` reduces each triple integral to products of 1D sine/cosine
    triple products, which are nonzero only when one frequency is the sum or
    difference of the other two; candidate l are enumerated from that rule.
    ``quadrature`` integrates grad-perp w_j . grad w_k against every w_l with a
    tensor Gauss rule and rejects rules that are not exact for the frequencies
    involved.  ``enumeration_seed`` shuffles the triad enumeration order (the
    stored tensor is canonicalized and must not depend on it).
    """
    if m > len(basis):
        raise ValueError(f"m={m} exceeds basis size {len(basis)}")
    b = basis.truncate(m) if len(basis) != m else basis
    if method == "closed_form":
        t = _assemble_closed_form(b, enumeration_seed)
    elif method == "quadrature":
        t = _assemble_quadrature(b, n_quad)
    else:
        raise ValueError(f"unknown assembly method {method!r}; expected 'closed_form' or 'quadrature'")
    log.info("assembled gamma m=%d method=%s nnz=%d (dense %d)", m, method, t.nnz, m ** 3)
    return t


def _assemble_closed_form(b: EigenBasis, seed: int | None) -> CouplingTensor:
    m = len(b)
    index = {pq: i for i, pq in enumerate(b.pairs())}
    pairs = [(j, k) for j in range(m) for k in range(m) if j != k]
    if seed is not None:
        rng = np.random.default_rng(seed)
        pairs = [pairs[i] for i in rng.permutation(len(pairs))]
    J, K, L = [], [], []
    for j, k in pairs:
        pj, qj, pk, qk = b.p[j], b.q[j], b.p[k], b.q[k]
        for pl in {abs(pj - pk), pj + pk}:
            for ql in {abs(qj - qk), qj + qk}:
                l = index.get((pl, ql))
                if l is not None:
                    J.append(j)
                    K.append(k)
                    L.append(l)
    J, K, L = (np.array(a, dtype=np.int64) for a in (J, K, L))
    if J.size == 0:
        return CouplingTensor(m, J, K, L, np.zeros(0), "closed_form")
    ints = _triad_integer(b.p[J], b.q[J], b.p[K], b.q[K], b.p[L], b.q[L])
    vals = ints / (2.0 * math.pi) / np.sqrt(b.lam[J].astype(float))
    return _canonical(m, J, K, L, vals, "closed_form", ints)


def quadrature_nodes_needed(b: EigenBasis) -> int:
    return nodes_for_frequency(3 * max(b.max_p, b.max_q))


def _assemble_quadrature(b: EigenBasis, n_quad: int | None) -> CouplingTensor:
    m = len(b)
    need = quadrature_nodes_needed(b)
    n = n_quad or need
    if exact_frequency(n) < 3 * max(b.max_p, b.max_q):
        raise ValueError(f"quadrature with {n} nodes is not exact for triple products "
                         f"up to frequency {3 * max(b.max_p, b.max_q)}; need >= {need}")
    g = gauss_grid(n)
    P, Q = b.max_p, b.max_q
    Sx, Sy = _sin_matrix(P, g.x), _sin_matrix(Q, g.y)
    Cx, Cy = _cos_matrix(P, g.x), _cos_matrix(Q, g.y)
    p0, q0 = b.p - 1, b.q - 1
    # mode gradients on the grid: (m, nx, ny)
    wx = NORM * (b.p[:, None, None] * Cx[p0][:, :, None] * Sy[q0][:, None, :])
    wy = NORM * (b.q[:, None, None] * Sx[p0][:, :, None] * Cy[q0][:, None, :])
    Ax = Sx * g.wx
    Ay = Sy * g.wy
    dense = np.zeros((m, m, m))
    for j in range(m):
        integrand = -wy[j][None] * wx + wx[j][None] * wy          # (k, nx, ny)
        proj = np.einsum("pi,kij,qj->kpq", Ax, integrand, Ay)
        dense[j] = NORM * proj[:, p0, q0] / math.sqrt(b.lam[j])
    J, K, L = np.nonzero(np.abs(dense) > 1e-13)
    return _canonical(m, J, K, L, dense[J, K, L], "quadrature")


# ------------------------------------------------------------------ dynamics

@dataclass
class GalerkinState:
    t: float
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)


def rhs(state: GalerkinState | np.ndarray, gamma: CouplingTensor) -> np.ndarray:
    theta = state.theta if isinstance(state, GalerkinState) else np.asarray(state)
    if theta.shape != (gamma.m,):
        raise ValueError(f"state dimension {theta.shape} does not match tensor m={gamma.m}")
    return -gamma.contract(theta)


def rhs_quadrature(theta: SpectralField, n: int | None = None) -> np.ndarray:
    """-P_m(u_m . grad theta_m) computed on a grid, independently of gamma."""
    K = max(theta.basis.max_p, theta.basis.max_q)
    g = gauss_grid(n or nodes_for_frequency(3 * K))
    u = velocity_from_theta(theta, g)
    gx, gy = synthesize_gradient(theta, g)
    adv = u.ux.values * gx.values + u.uy.values * gy.values
    return -analyze(adv, theta.basis, g, bandwidth=2 * K).coeffs


def energy(theta: np.ndarray) -> float:
    return 0.5 * float(theta @ theta)


def hamiltonian(theta: np.ndarray, basis: EigenBasis) -> float:
    return 0.5 * float(np.sum(theta * theta / np.sqrt(basis.lam[: theta.size].astype(float))))


def step(state: GalerkinState, gamma: CouplingTensor, dt: float, integrator: str = "implicit_midpoint",
         tol: float = 1e-13, max_iter: int = 100) -> GalerkinState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = state.theta
    f = lambda v: -gamma.contract(v)
    if integrator == "rk4":
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        return GalerkinState(state.t + dt, x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
    if integrator == "implicit_midpoint":
        scale = max(float(np.max(np.abs(x))), np.finfo(float).tiny)
        y = x + dt * f(x)
        for it in range(max_iter):
            y_new = x + dt * f(0.5 * (x + y))
            delta = float(np.max(np.abs(y_new - y)))
            y = y_new
            if delta <= tol * scale:
                return GalerkinState(state.t + dt, y)
        raise ConvergenceError(f"implicit midpoint did not converge in {max_iter} iterations "
                               f"(last correction {delta:.3e}); reduce dt")
    raise ValueError(f"unknown integrator {integrator!r}; valid: {', '.join(INTEGRATORS)}")


@dataclass
class TrajectoryRecord:
    m: int
    times: np.ndarray
    energy: np.ndarray
    hamiltonian: np.ndarray
    snapshots: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def relative_drift(self, which: str = "energy") -> float:
        v = getattr(self, which)
        return float(np.max(np.abs(v - v[0])) / abs(v[0])) if v[0] != 0 else float(np.max(np.abs(v)))

    def to_csv(self, with_theta: bool = True) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        snaps = self.snapshots if with_theta else None
        head = ["t", "energy", "hamiltonian"]
        if snaps is not None:
            head += [f"theta_{i}" for i in range(1, self.m + 1)]
        wr.writerow(head)
        for i, t in enumerate(self.times):
            row = [repr(float(t)), repr(float(self.energy[i])), repr(float(self.hamiltonian[i]))]
            if snaps is not None:
                row += [repr(float(v)) for v in snaps[i]]
            wr.writerow(row)
        return buf.getvalue()


def initial_condition(recipe, m: int, seed: int = 0, beta: float = 1.0, full_modes: int | None = None):
    """Build theta_0 and return (P_m theta_0 on m modes, theta_0 on its own basis).

    ``recipe`` is a SpectralField, a callable f(X, Y) analyzed by quadrature,
    a (p, q) pair for a single mode, or the string "random" (seeded spectrum
    z_j lambda_j^{-beta}, unit L2 norm, drawn on ``full_modes`` modes).
    """
    if isinstance(recipe, SpectralField):
        full = recipe
    elif isinstance(recipe, str) and recipe == "random":
        full = random_field(build_basis(full_modes or max(m, 256)), seed, beta)
    elif isinstance(recipe, tuple):
        b = build_basis(max(m, 1))
        full = SpectralField.unit(b if recipe in b.pairs() else _basis_with(recipe), *recipe)
    elif callable(recipe):
        b = build_basis(full_modes or max(m, 256))
        g = gauss_grid(max(256, nodes_for_frequency(2 * max(b.max_p, b.max_q))))
        full = analyze(recipe, b, g, bandwidth=0)
    else:
        raise ValueError(f"unsupported initial-data recipe {recipe!r}")
    if len(full) >= m:
        return project(full, m), full
    c = np.zeros(m)
    c[: len(full)] = full.coeffs
    return SpectralField(build_basis(m), c), full


def _basis_with(pq) -> EigenBasis:
    M = 1
    while pq not in build_basis(M).pairs():
        M *= 2
    return build_basis(M)


def run(theta0: SpectralField, T: float, dt: float, integrator: str = "implicit_midpoint",
        sample_stride: int = 10, gamma: CouplingTensor | None = None, keep_snapshots: bool = True,
        tol: float = 1e-13, max_iter: int = 100) -> TrajectoryRecord:
    """Integrate the m-mode system from P_m theta_0 (``theta0`` already on m modes)."""
    if T <= 0:
        raise ValueError("T must be positive")
    m = len(theta0)
    basis = theta0.basis
    gamma = gamma or assemble_gamma(basis, m)
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * T:
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    state = GalerkinState(0.0, theta0.coeffs.copy())
    times, E, H, snaps = [0.0], [energy(state.theta)], [hamiltonian(state.theta, basis)], [state.theta.copy()]
    for n in range(1, nsteps + 1):
        new = step(state, gamma, dt, integrator, tol, max_iter)
        new.t = n * dt
        if not np.all(np.isfinite(new.theta)):
            raise SimulationAborted(f"non-finite state at step {n} (t={new.t})", state)
        state = new
        if n % sample_stride == 0 or n == nsteps:
            times.append(state.t)
            E.append(energy(state.theta))
            H.append(hamiltonian(state.theta, basis))
            snaps.append(state.theta.copy())
    return TrajectoryRecord(m, np.array(times), np.array(E), np.array(H),
                            np.array(snaps) if keep_snapshots else None,
                            {"dt": dt, "integrator": integrator, "T": T, "stride": sample_stride})
