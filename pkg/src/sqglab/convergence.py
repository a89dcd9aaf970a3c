"""Convergence diagnostics for the Galerkin hierarchy.

Projection decay of smooth compactly supported test functions, the
space-time weak-form residual of a Galerkin trajectory, and a study that
runs the hierarchy on a ladder of truncation levels from common data.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .eigenbasis import build_basis
from .galerkin import (
    CouplingTensor, TrajectoryRecord, assemble_gamma, hamiltonian, initial_condition, rhs, run,
)
from .quadrature import grid_for_frequency, uniform_grid
from .spectral import (
    SpectralField, evaluate_gradient, frac_apply, pad, sobolev_norm, synthesize, synthesize_gradient,
    velocity_from_theta,
)
from .testfunctions import TestFunction, TimeBump

log = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-10


class TailWarning(UserWarning):
    """Projection tail beyond the analysis size is not negligible."""


# ------------------------------------------------------------ projection decay

@dataclass
class DecayTable:
    """Sobolev-k projection errors ||phi - P_m phi||_{k,D} along a ladder."""

    k: float
    ladder: tuple[int, ...]
    errors: np.ndarray
    analysis_modes: int
    tail_fraction: float
    coefficient_sup: float  # max_j |phi_j| lambda_j^N over the analyzed modes
    coefficient_bound: float  # ||Delta^N phi||_{L^2}
    N: int = 3

    @property
    def local_rates(self) -> np.ndarray:
        """Algebraic rates log(e_i / e_{i+1}) / log(m_{i+1} / m_i)."""
        m = np.asarray(self.ladder, dtype=float)
        return np.log(self.errors[:-1] / self.errors[1:]) / np.log(m[1:] / m[:-1])

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))

    @property
    def superalgebraic(self) -> bool:
        """Local rates increase along the ladder (no algebraic plateau)."""
        r = self.local_rates
        return bool(r.size < 2 or np.all(np.diff(r) > 0))

    @property
    def coefficients_bounded(self) -> bool:
        return self.coefficient_sup <= self.coefficient_bound

    def rows(self):
        for m, e in zip(self.ladder, self.errors):
            yield m, f"decay_k{self.k:g}", "", float(e)


def projection_decay(phi: TestFunction, k: float = 1.0, ladder=(16, 64, 256),
                     analysis_modes: int | None = None, N: int = 3) -> DecayTable:
    """Projection errors of ``phi`` in the D(Lambda^k) norm.

    Coefficients are computed once on ``analysis_modes`` modes (default
    max(4 max(ladder), 16384)); the error at level m sums lambda_j^k phi_j^2
    over m < j <= analysis_modes.  The L2 mass beyond the analysis size is
    estimated by Parseval against a fine quadrature of ||phi||^2; a
    :class:`TailWarning` is issued when its fraction exceeds 1e-10.
    """
    ladder = tuple(int(m) for m in ladder)
    M = analysis_modes or max(4 * max(ladder), 16384)
    if M <= max(ladder):
        raise ValueError(f"analysis size {M} must exceed the largest ladder level {max(ladder)}")
    b = build_basis(M)
    c = phi.analyze(b).coeffs
    total = phi.l2_norm(512) ** 2
    tail = max(total - float(c @ c), 0.0) / total
    if tail > TAIL_TOLERANCE:
        warnings.warn(f"projection tail fraction {tail:.2e} beyond {M} modes exceeds "
                      f"{TAIL_TOLERANCE:g}", TailWarning, stacklevel=2)
    w = c * c * b.lam.astype(float) ** k
    tails = np.cumsum(w[::-1])[::-1]  # tails[i] = sum_{j >= i} w_j
    errors = np.sqrt(np.array([tails[m] for m in ladder]))
    sup = float(np.max(np.abs(c) * b.lam.astype(float) ** N))
    return DecayTable(k, ladder, errors, M, tail, sup, phi.laplacian_power_norm(N), N)


# ------------------------------------------------------------ weak residual

@dataclass
class WeakResidual:
    """Space-time weak form of a Galerkin trajectory against sigma(t) phi(x)."""

    value: float  # int sigma' <theta, P_m phi> + sigma int theta u . grad P_m phi
    time_term: float
    transport_term: float
    projection_gap: float  # |transport with phi - transport with P_m phi|
    projection_bound: float  # ||grad (I - P_m) phi||_inf int sigma ||theta u||_L1

    @property
    def magnitude(self) -> float:
        return abs(self.value)


def _transport_integrand(theta: SpectralField, grad_phi, grid) -> tuple[float, float]:
    """(int theta u . grad_phi, int |theta u|) on ``grid``."""
    th = synthesize(theta, grid).values
    u = velocity_from_theta(theta, grid)
    fx, fy = grad_phi
    flux = th * (u.ux.values * fx + u.uy.values * fy)
    return grid.integrate(flux), grid.integrate(np.abs(th) * np.hypot(u.ux.values, u.uy.values))


def weak_residual(traj: TrajectoryRecord, phi: TestFunction, sigma: TimeBump | None = None,
                  n_sup: int = 257) -> WeakResidual:
    """Weak-form residual of ``traj`` against sigma(t) phi(x).

    The time integral uses composite Simpson on the stored snapshots; the
    space integral uses a Gauss grid exact for the band-limited triple
    product theta u grad P_m phi.  The residual is linear in phi.
    """
    if traj.snapshots is None:
        raise ValueError("weak residual needs stored snapshots")
    m = traj.m
    basis = build_basis(m)
    sigma = sigma or TimeBump(0.0, float(traj.times[-1]))
    Pphi = phi.analyze(basis)
    K = max(basis.max_p, basis.max_q)
    g = grid_for_frequency(3 * K)
    gP = tuple(v.values for v in synthesize_gradient(Pphi, g))
    # the exact phi lives on its support box; use a fine grid there
    gs = phi.support_grid(max(128, 4 * K))
    Xs, Ys = gs.mesh()
    gphi = phi.gradient(Xs, Ys)

    pair, flux, flux_full, mass = [], [], [], []
    for th in traj.snapshots:
        f = SpectralField(basis, th)
        pair.append(float(th @ Pphi.coeffs))
        a, l1 = _transport_integrand(f, gP, g)
        flux.append(a)
        mass.append(l1)
        flux_full.append(_transport_integrand(f, gphi, gs)[0])
    t = traj.times
    s, ds = sigma(t), sigma.derivative(t)
    time_term = float(simpson(ds * np.array(pair), x=t))
    transport = float(simpson(s * np.array(flux), x=t))
    transport_full = float(simpson(s * np.array(flux_full), x=t))

    # sup of grad (phi - P_m phi) on a uniform grid
    U = uniform_grid(n_sup)
    X, Y = U.mesh()
    ex, ey = phi.gradient(X, Y)
    px, py = evaluate_gradient(Pphi, X, Y)
    gap_sup = float(np.max(np.hypot(ex - px, ey - py)))
    bound = gap_sup * float(simpson(s * np.array(mass), x=t))
    return WeakResidual(time_term + transport, time_term, transport,
                        abs(transport_full - transport), bound)


# ------------------------------------------------------------ ladder study

@dataclass
class ConvergenceStudy:
    """Galerkin trajectories on a ladder of truncation levels from one theta_0."""

    ladder: tuple[int, ...]
    theta0: SpectralField
    trajectories: dict[int, TrajectoryRecord] = field(default_factory=dict)
    tensors: dict[int, CouplingTensor] = field(default_factory=dict)

    def psi(self, m: int, i: int) -> SpectralField:
        """Streamfunction of level m at sample i."""
        return frac_apply(SpectralField(build_basis(m), self.trajectories[m].snapshots[i]), -1.0)


def run_study(ladder=(8, 16, 32, 64), recipe="random", seed: int = 0, beta: float = 1.0,
              T: float = 1.0, dt: float = 1e-2, integrator: str = "implicit_midpoint",
              stride: int = 10, full_modes: int | None = None, init_norm: float = 1.0,
              threads: int = 1) -> ConvergenceStudy:
    """Run every ladder level from the same theta_0 (projected per level).

    Levels are independent and may run on ``threads`` workers; results are
    collected in ladder order so the output does not depend on scheduling.
    """
    ladder = tuple(sorted(int(m) for m in ladder))
    full_modes = full_modes or max(4 * ladder[-1], 256)
    _, theta0 = initial_condition(recipe, ladder[-1], seed, beta, full_modes)
    if init_norm != 1.0:
        theta0 = theta0 * (init_norm / math.sqrt(theta0.dot(theta0)))
    study = ConvergenceStudy(ladder, theta0)

    def one(m):
        th, _ = initial_condition(theta0, m)
        gam = assemble_gamma(th.basis, m)
        return m, gam, run(th, T, dt, integrator, stride, gam)

    workers = max(1, int(threads))
    if workers == 1:
        results = [one(m) for m in ladder]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, ladder))
    for m, gam, tr in results:
        study.tensors[m] = gam
        study.trajectories[m] = tr
    return study


@dataclass
class CauchyRow:
    m_coarse: int
    m_fine: int
    epsilon: float
    sup_difference: float  # sup_t ||psi_fine - psi_coarse||_{1-eps, D}


def cauchy_diagnostic(study: ConvergenceStudy, epsilon: float = 0.25) -> list[CauchyRow]:
    """sup over sample times of ||psi_{m'} - psi_m||_{1-epsilon,D} for consecutive levels.

    Differences are taken on the finer basis after padding the coarser field.
    The levels must share sample times.
    """
    rows = []
    for a, b in zip(study.ladder[:-1], study.ladder[1:]):
        ta, tb = study.trajectories[a], study.trajectories[b]
        if ta.times.shape != tb.times.shape or not np.allclose(ta.times, tb.times):
            raise ValueError(f"levels {a} and {b} do not share sample times")
        fine = build_basis(b)
        sup = 0.0
        for i in range(ta.times.size):
            d = study.psi(b, i) - pad(study.psi(a, i), fine)
            sup = max(sup, sobolev_norm(d, 1.0 - epsilon))
        rows.append(CauchyRow(a, b, epsilon, sup))
    return rows


def merged_difference_norm(a: SpectralField, b: SpectralField, s: float) -> float:
    """||a - b||_{s,D} from coefficient maps keyed by (p, q), without padding."""
    acc: dict[tuple[int, int], float] = {}
    for f, sign in ((a, 1.0), (b, -1.0)):
        for (p, q), c in zip(f.basis.pairs(), f.coeffs):
            acc[(p, q)] = acc.get((p, q), 0.0) + sign * c
    keys = sorted(acc, key=lambda pq: (pq[0] ** 2 + pq[1] ** 2, pq[0], pq[1]))
    lam = np.array([p * p + q * q for p, q in keys], dtype=float)
    c = np.array([acc[k] for k in keys])
    return float(math.sqrt(np.sum(lam ** s * c ** 2)))


def padding_consistency(study: ConvergenceStudy, s: float = 0.75) -> float:
    """Largest |padded norm - merged norm| over consecutive levels at the last sample."""
    worst = 0.0
    for a, b in zip(study.ladder[:-1], study.ladder[1:]):
        fa, fb = study.psi(a, -1), study.psi(b, -1)
        padded = sobolev_norm(fb - pad(fa, build_basis(b)), s)
        worst = max(worst, abs(padded - merged_difference_norm(fb, fa, s)))
    return worst


def initial_hamiltonian_gap(study: ConvergenceStudy) -> dict[int, float]:
    """|H_m(0) - H(theta_0)| per level, with H(theta_0) on the full data basis."""
    H = hamiltonian(study.theta0.coeffs, study.theta0.basis)
    return {m: abs(float(study.trajectories[m].hamiltonian[0]) - H) for m in study.ladder}


def hamiltonian_constancy(study: ConvergenceStudy) -> dict[int, float]:
    """max_t |H_m(t) - H_m(0)| / H_m(0) per level."""
    return {m: study.trajectories[m].relative_drift("hamiltonian") for m in study.ladder}


@dataclass
class StreamTendency:
    """<d_t psi_m, phi> two ways at one sample."""

    spectral: float  # sum_l lambda_l^{-1/2} (d_t theta_l) (P_m phi)_l
    flux: float  # int (u_m theta_m) . grad Lambda^{-1} P_m phi
    theta_sq: float  # ||theta_m||^2

    @property
    def ratio(self) -> float:
        return abs(self.spectral) / self.theta_sq if self.theta_sq > 0 else 0.0


def stream_tendency(theta: SpectralField, gamma: CouplingTensor, phi: TestFunction) -> StreamTendency:
    """Pairing of d_t psi_m with phi from the ODE and from the flux form.

    The flux form pairs u_m theta_m against the gradient of Lambda^{-1} P_m phi.
    """
    basis = theta.basis
    Pphi = phi.analyze(basis)
    dtheta = rhs(theta.coeffs, gamma)
    spectral = float(np.sum(dtheta * Pphi.coeffs / np.sqrt(basis.lam.astype(float))))
    K = max(basis.max_p, basis.max_q)
    g = grid_for_frequency(3 * K)
    grad = tuple(v.values for v in synthesize_gradient(frac_apply(Pphi, -1.0), g))
    flux, _ = _transport_integrand(theta, grad, g)
    return StreamTendency(spectral, flux, theta.dot(theta))


def log_tendency_ratios(study: ConvergenceStudy, phi: TestFunction) -> dict[int, float]:
    """max over samples of |<d_t psi_m, phi>| / ||theta_m||^2 per level (logged)."""
    out = {}
    for m in study.ladder:
        tr = study.trajectories[m]
        basis = build_basis(m)
        out[m] = max(stream_tendency(SpectralField(basis, th), study.tensors[m], phi).ratio
                     for th in tr.snapshots)
        log.info("m=%d  max |<d_t psi, phi>| / ||theta||^2 = %.4e", m, out[m])
    return out


STUDY_HEADER = ["m", "quantity", "t_or_pair", "value"]


def study_csv(study: ConvergenceStudy, epsilon: float = 0.25, phi: TestFunction | None = None,
              decay: DecayTable | None = None) -> str:
    """Rows m,quantity,t_or_pair,value for the diagnostics of a study."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(STUDY_HEADER)
    for m in study.ladder:
        tr = study.trajectories[m]
        for t, E, H in zip(tr.times, tr.energy, tr.hamiltonian):
            wr.writerow([m, "energy", repr(float(t)), repr(float(E))])
            wr.writerow([m, "hamiltonian", repr(float(t)), repr(float(H))])
    for row in cauchy_diagnostic(study, epsilon):
        wr.writerow([row.m_fine, f"cauchy_eps{epsilon:g}", f"{row.m_coarse}-{row.m_fine}",
                     repr(row.sup_difference)])
    for m, v in initial_hamiltonian_gap(study).items():
        wr.writerow([m, "H0_gap", "0", repr(v)])
    for m, v in hamiltonian_constancy(study).items():
        wr.writerow([m, "H_drift", "", repr(v)])
    if phi is not None:
        for m, v in log_tendency_ratios(study, phi).items():
            wr.writerow([m, "tendency_ratio", "", repr(v)])
    if decay is not None:
        for m, q, tp, v in decay.rows():
            wr.writerow([m, q, tp, repr(v)])
    return buf.getvalue()
