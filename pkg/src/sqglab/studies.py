"""Subcommand bodies: run a study, write its CSV artifacts, collect checks.

Each ``run_*`` function takes a :class:`RunConfig` and an output directory
and returns a :class:`Summary`.  Every asserted invariant appears as exactly
one PASS/FAIL line; measured-only quantities are INFO lines.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from . import plotting
from .commutators import (
    REPORT_HEADER, OversamplingWarning, commutator_frac_grad_kernel, commutator_frac_grad_spectral,
    commutator_identity_residual, commutator_lambda_chi, diagonal_ladder, frac_grad_normalized,
)
from .config import RunConfig
from .convergence import (
    TailWarning, cauchy_diagnostic, hamiltonian_constancy, initial_hamiltonian_gap,
    padding_consistency, projection_decay, run_study, study_csv, weak_residual,
)
from .eigenbasis import _enumerate_pairs, build_basis, eval_mode, eval_mode_laplacian
from .galerkin import assemble_gamma, initial_condition, rhs, rhs_quadrature, run
from .heatkernel import (
    compute_cs, elementary_time_integral, elementary_time_integral_exact, fit_cancellation_constant,
    frac_via_subordination, gaussian_bound_ratios, gradient_bound_ratio, interval_kernel,
    kernel_eval, normalization_integral, sample_pairs,
)
from .quadrature import gauss_grid, nodes_for_frequency
from .spectral import (
    SpectralField, default_grid, dirichlet_energy, frac_apply, random_field, sobolev_norm, synthesize,
    velocity_from_theta,
)
from .testfunctions import TestFunction

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ summary

@dataclass
class Summary:
    command: str
    lines: list[tuple[str, str, str]] = field(default_factory=list)  # (status, name, detail)

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.lines.append(("PASS" if passed else "FAIL", name, detail))
        return passed

    def info(self, name: str, detail: str):
        self.lines.append(("INFO", name, detail))

    @property
    def failed(self) -> list[str]:
        return [n for s, n, _ in self.lines if s == "FAIL"]

    @property
    def ok(self) -> bool:
        return not self.failed

    def text(self) -> str:
        out = [f"# sqglab {self.command}"]
        out += [f"{s} {n}: {d}" if d else f"{s} {n}" for s, n, d in self.lines]
        n_pass = sum(1 for s, _, _ in self.lines if s == "PASS")
        out.append(f"# {n_pass} passed, {len(self.failed)} failed")
        return "\n".join(out) + "\n"


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _threads(cfg: RunConfig) -> int:
    return cfg.threads or os.cpu_count() or 1


def _ordered_map(fn, items, threads: int):
    """map with results in input order, optionally on a thread pool."""
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _test_function(cfg: RunConfig) -> TestFunction:
    return TestFunction(rho=cfg.rho, center=(cfg.center_x, cfg.center_y))


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = float(np.max(np.abs(b)))
    return float(np.max(np.abs(a - b))) / scale if scale > 0 else float(np.max(np.abs(a)))


def initial_data(cfg: RunConfig, m: int | None = None):
    """(P_m theta_0, theta_0) from the configured recipe."""
    m = m or cfg.m
    if cfg.init == "mode":
        recipe = (cfg.init_p, cfg.init_q)
    elif cfg.init == "bump":
        recipe = _test_function(cfg).value
    else:
        recipe = "random"
    th, full = initial_condition(recipe, m, cfg.seed, cfg.init_beta, cfg.full_modes)
    if cfg.init_norm != 1.0:
        nrm = math.sqrt(full.dot(full))
        full = full * (cfg.init_norm / nrm)
        th = th * (cfg.init_norm / nrm)
    return th, full


# ------------------------------------------------------------------ simulate

def run_simulate(cfg: RunConfig, out: Path) -> Summary:
    sm = Summary("simulate")
    th, _ = initial_data(cfg)
    gam = assemble_gamma(th.basis, cfg.m)
    t0 = time.perf_counter()
    traj = run(th, cfg.T, cfg.dt, cfg.integrator, cfg.stride, gam, True, cfg.tol, cfg.max_iter)
    sm.info("runtime", f"{time.perf_counter() - t0:.2f} s for {round(cfg.T / cfg.dt)} steps")
    _write(out, "trajectory.csv", traj.to_csv())
    _write(out, "basis.csv", th.basis.to_csv())
    _write(out, "theta0.csv", th.to_csv())
    dE, dH = traj.relative_drift("energy"), traj.relative_drift("hamiltonian")
    if cfg.integrator == "implicit_midpoint":
        sm.check("energy_conservation", dE < 1e-10, f"max relative drift of E_m = {dE:.3e} (< 1e-10)")
        sm.check("hamiltonian_conservation", dH < 1e-10, f"max relative drift of H_m = {dH:.3e} (< 1e-10)")
    else:
        sm.info("energy_drift", f"{dE:.3e} (rk4 is not conservative; see the invariants subcommand)")
        sm.info("hamiltonian_drift", f"{dH:.3e}")
    change = float(np.max(np.abs(traj.snapshots - traj.snapshots[0])))
    sm.info("state_change", f"max |theta(t) - theta(0)| = {change:.3e}"
            + (" (steady state)" if change == 0.0 else ""))
    if cfg.figures:
        plotting.plot_invariants(traj, out / "invariants.png")
        plotting.plot_theta(SpectralField(th.basis, traj.snapshots[-1]), out / "theta_final.svg",
                            title=f"theta_m at t={traj.times[-1]:g}")
    return sm


# ------------------------------------------------------------------ gamma

def run_gamma(cfg: RunConfig, out: Path) -> Summary:
    sm = Summary("gamma")
    m = cfg.m
    basis = build_basis(m)
    tensors = {meth: assemble_gamma(basis, m, meth) for meth in cfg.gamma_methods}
    _write(out, "basis.csv", basis.to_csv())
    for meth, g in tensors.items():
        _write(out, "gamma.csv" if meth == "closed_form" else f"gamma_{meth}.csv", g.to_csv())
        G, T = g.dense(), g.dense_unnormalized()
        exact = meth == "closed_form"
        tol = 0.0 if exact else 1e-12
        scale = float(np.abs(G).max()) or 1.0
        a = float(np.abs(G + G.transpose(0, 2, 1)).max()) / scale
        idx = np.arange(m)
        diag = max(float(np.abs(G[idx, idx, :]).max()), float(np.abs(G[:, idx, idx]).max())) / scale
        tot = max(float(np.abs(T + T.transpose(p)).max()) for p in ((1, 0, 2), (0, 2, 1), (2, 1, 0)))
        tot /= float(np.abs(T).max()) or 1.0
        bound = "exactly 0" if exact else "<= 1e-12"
        sm.check(f"{meth}_antisymmetry", a <= tol, f"max |g_jkl + g_jlk| / max|g| = {a:.3e} ({bound})")
        sm.check(f"{meth}_diagonal", diag <= tol, f"max |g_jjl|, |g_jkk| = {diag:.3e} ({bound})")
        sm.check(f"{meth}_total_antisymmetry", tot <= tol,
                 f"max |T + T^sigma| / max|T| = {tot:.3e} ({bound})")
        sm.info(f"{meth}_nnz", str(g.nnz))
    if len(tensors) == 2:
        dev = float(np.abs(tensors["closed_form"].dense() - tensors["quadrature"].dense()).max())
        sm.check("cross_method", dev < 1e-12, f"max |closed_form - quadrature| = {dev:.3e} (< 1e-12)")
    ref = tensors.get("closed_form") or assemble_gamma(basis, m)
    same = all(
        np.array_equal(ref.j, g.j) and np.array_equal(ref.k, g.k) and np.array_equal(ref.l, g.l)
        and np.array_equal(ref.values, g.values)
        for g in (assemble_gamma(basis, m, enumeration_seed=s) for s in (1, 2, 3)))
    sm.check("permutation_determinism", same, "shuffled triad enumeration orders give identical tensors")
    worst = 0.0
    for seed in range(5):
        th = random_field(basis, cfg.seed + seed)
        r_t = rhs(th.coeffs, ref)
        r_q = rhs_quadrature(th)
        worst = max(worst, _rel(r_t, r_q))
    sm.check("rhs_cross_check", worst < 1e-10,
             f"tensor vs quadrature rhs, 5 random states: max relative difference {worst:.3e} (< 1e-10)")
    return sm


# ------------------------------------------------------------------ invariants

def rk4_drift_order(cfg: RunConfig):
    """Energy drift of rk4 at each dt; returns (dts, drifts_E, drifts_H, slope)."""
    th, _ = initial_condition("random", cfg.rk4_m, cfg.seed, cfg.init_beta, cfg.full_modes)
    th = th * (cfg.rk4_init_norm / math.sqrt(th.dot(th)))
    gam = assemble_gamma(th.basis, cfg.rk4_m)
    dts = np.array(sorted(cfg.rk4_dts, reverse=True))
    dE, dH = [], []
    for dt in dts:
        tr = run(th, cfg.rk4_T, float(dt), "rk4", 1, gam, keep_snapshots=False)
        dE.append(tr.relative_drift("energy"))
        dH.append(tr.relative_drift("hamiltonian"))
    slope = float(np.polyfit(np.log(dts), np.log(dE), 1)[0])
    return dts, np.array(dE), np.array(dH), slope


def run_invariants(cfg: RunConfig, out: Path) -> Summary:
    sm = Summary("invariants")
    M = cfg.oversampling
    b = build_basis(M)
    rows = []
    lam_err = int(np.max(np.abs(b.lam - (b.p ** 2 + b.q ** 2))))
    sm.check("eigenvalues_exact", lam_err == 0, f"max |lambda_j - (p^2 + q^2)| = {lam_err} over M={M}")
    K = max(b.max_p, b.max_q)
    n_orth = max(K + 2, nodes_for_frequency(2 * K))
    g = gauss_grid(n_orth)
    X, Y = g.mesh()
    W = np.stack([eval_mode(md, X, Y).ravel() for md in b])
    w = np.outer(g.wx, g.wy).ravel()
    gram = (W * w) @ W.T
    orth = float(np.abs(gram - np.eye(M)).max())
    sm.check("orthonormality", orth < 1e-10, f"max |<w_i,w_j>_quad - delta_ij| = {orth:.3e} "
             f"with {n_orth} Gauss nodes per axis (< 1e-10)")
    lap = max(float(np.abs(-eval_mode_laplacian(md, X, Y) - md.eigenvalue * eval_mode(md, X, Y)).max())
              / md.eigenvalue for md in b)
    sm.check("eigenfunction_identity", lap < 1e-13, f"max |-Lap w_j - lambda_j w_j| / lambda_j = {lap:.3e}")
    rebuilt = _enumerate_pairs(M)
    sm.check("ordering_reproducible", tuple(rebuilt) == b.pairs(),
             "rebuilding the basis reproduces the mode list")
    rows += [("lambda_error", float(lam_err)), ("orthonormality", orth), ("eigen_identity", lap)]

    f = random_field(build_basis(cfg.m), cfg.seed)
    h = random_field(build_basis(cfg.m), cfg.seed + 1)
    grid = default_grid(f, f)
    quad_sq = grid.integrate(synthesize(f, grid).values ** 2)
    parse = abs(sobolev_norm(f, 0) ** 2 - float(f.coeffs @ f.coeffs))
    parse_q = abs(quad_sq - float(f.coeffs @ f.coeffs)) / float(f.coeffs @ f.coeffs)
    sm.check("parseval", parse < 1e-14 * float(f.coeffs @ f.coeffs),
             f"|sobolev_norm(f,0)^2 - sum f_j^2| = {parse:.3e}; quadrature L2 relative {parse_q:.3e}")
    dual = max(abs(frac_apply(f, s).dot(h) - f.dot(frac_apply(h, s))) for s in (0.5, 1.0, 1.5))
    sm.check("duality", dual < 1e-13, f"max |<L^s f, g> - <f, L^s g>|, s in (0.5, 1, 1.5) = {dual:.3e}")
    comp = max(_rel(frac_apply(frac_apply(f, a), bb).coeffs, frac_apply(f, a + bb).coeffs)
               for a, bb in ((0.5, 0.5), (1.0, -1.0), (0.25, 1.25)))
    sm.check("composition", comp < 1e-15, f"max relative |L^a L^b f - L^(a+b) f| = {comp:.3e}")
    theta = random_field(build_basis(cfg.m), cfg.seed)
    Kt = max(theta.basis.max_p, theta.basis.max_q)
    vg = gauss_grid(nodes_for_frequency(2 * Kt + 2))
    div = float(np.abs(velocity_from_theta(theta, vg).divergence_coefficients(Kt + 1)).max())
    sm.check("divergence_free", div < 1e-12, f"max spectral divergence coefficient = {div:.3e} (< 1e-12)")
    iso = abs(sobolev_norm(f, 1.0) ** 2 - dirichlet_energy(f)) / sobolev_norm(f, 1.0) ** 2
    sm.check("isometry_h1", iso < 1e-12, f"| ||f||_(1,D)^2 - int |grad f|^2 | relative = {iso:.3e}")
    rows += [("parseval", parse), ("duality", dual), ("divergence", div), ("isometry", iso)]

    dts, dE, dH, slope = rk4_drift_order(cfg)
    _write(out, "rk4_order.csv", _rows_csv(["dt", "energy_drift", "hamiltonian_drift"],
                                           [(float(a), float(e), float(hh)) for a, e, hh in zip(dts, dE, dH)]))
    sm.check("rk4_drift_order", abs(slope - 4.0) <= 0.3,
             f"log-log slope of E drift vs dt = {slope:.3f} (expected 4 +- 0.3)")
    rows.append(("rk4_slope", slope))
    _write(out, "invariants.csv", _rows_csv(["quantity", "value"], rows))
    if cfg.figures:
        plotting.plot_drift_order(dts, dE, slope, out / "rk4_order.png")
    return sm


# ------------------------------------------------------------------ heat oracle

def run_heat_oracle(cfg: RunConfig, out: Path) -> Summary:
    sm = Summary("heat-oracle")
    rng = np.random.default_rng(cfg.seed)
    rows = []
    # subordination against the eigen route
    f = SpectralField(build_basis(5), rng.standard_normal(5))
    worst = 0.0
    for s in cfg.frac_orders:
        sub = frac_via_subordination(f, s)
        err = sobolev_norm(sub.field - frac_apply(f, s), 0) / sobolev_norm(f, s)
        worst = max(worst, err)
        rows.append(("subordination", math.nan, math.nan, s, err, "||sub - eigen||_0 / ||f||_(s,D)"))
    sm.check("subordination_consistency", worst < 1e-6,
             f"max ||L^s_sub f - L^s_eigen f|| / ||f||_(s,D) over s in {cfg.frac_orders} = {worst:.3e} (< 1e-6)")
    nerr = max(abs(normalization_integral(s) - 1.0) for s in cfg.frac_orders)
    sm.check("cs_normalization", nerr < 1e-8, f"max |c_s int t^(-1-s/2)(1-e^-t) dt - 1| = {nerr:.3e} (< 1e-8)")
    cs_dev = 0.0
    for s in cfg.frac_orders:
        a = 0.5 * s
        val = (quad(lambda t: t ** (-1 - a) * -math.expm1(-t), 0, 1, limit=200)[0]
               + quad(lambda t: t ** (-1 - a) * -math.expm1(-t), 1, math.inf, limit=200)[0])
        cs_dev = max(cs_dev, abs(compute_cs(s) * val - 1.0))
    sm.info("cs_adaptive_oracle", f"closed-form c_s against adaptive quadrature: {cs_dev:.3e}")

    # kernel symmetry and cross-method agreement
    xs, ys = sample_pairs(cfg.heat_pairs)
    sym, cross = 0.0, 0.0
    for t in cfg.heat_times:
        a = kernel_eval(xs, ys, t, "image_series")
        bsw = kernel_eval(ys, xs, t, "image_series")
        e = kernel_eval(xs, ys, t, "eigen_sum")
        sym = max(sym, _rel(a.H, bsw.H))
        cross = max(cross, float(np.max(np.abs(e.H - a.H) / np.abs(a.H))))
        for (x, y, hi, he) in zip(xs, ys, a.H, e.H):
            rows.append(("H_cross", float(x[0]), float(x[1]), t, float(abs(hi - he) / abs(hi)),
                         f"eigen_sum vs image_series at y=({y[0]:.6f},{y[1]:.6f})"))
    sm.check("kernel_symmetry", sym < 1e-13, f"max |H(x,y) - H(y,x)| relative = {sym:.3e}")
    sm.check("kernel_cross_agreement", cross < 1e-10,
             f"eigen_sum vs image_series, max per-pair relative difference over {cfg.heat_pairs} pairs, t in {cfg.heat_times}: {cross:.3e} (< 1e-10)")

    # sub-Markov mass, separable in y
    zn, zw = np.polynomial.legendre.leggauss(400)
    yq, wq = 0.5 * math.pi * (zn + 1), 0.5 * math.pi * zw
    mass_max = 0.0
    for t in cfg.heat_times:
        for x in xs:
            m1 = interval_kernel(np.full_like(yq, x[0]), yq, t)[0] @ wq
            m2 = interval_kernel(np.full_like(yq, x[1]), yq, t)[0] @ wq
            mass_max = max(mass_max, float(m1 * m2))
    sm.check("sub_markov", mass_max <= 1 + 1e-10, f"max int H(x,y,t) dy = {mass_max:.15f} (<= 1 + 1e-10)")

    # gradient bound: finite and stable under refinement of the y-sample set
    centers = np.array([[math.pi / 2, math.pi / 2], [0.5, 1.0], [0.2, 0.2]])
    ratios = []
    for n in (24, 48):
        gy = np.linspace(0.0, math.pi, n + 1)[1:-1]
        Yg = np.stack(np.meshgrid(gy, gy, indexing="ij"), axis=-1).reshape(-1, 2)
        r, grows = gradient_bound_ratio(centers, Yg, cfg.heat_times, K=8.0)
        ratios.append(r)
    for br in grows:
        rows.append((br.quantity, br.x1, br.x2, br.t, br.measured, br.bound_form))
    stable = math.isfinite(ratios[1]) and abs(ratios[1] - ratios[0]) <= 0.1 * ratios[1]
    sm.check("gradient_bound", stable, f"sup |grad_x H| t^(3/2) e^(|x-y|^2/(8t)): C = {ratios[0]:.4f} "
             f"-> {ratios[1]:.4f} under 2x sample refinement, K = 8")
    up, lo, brows = gaussian_bound_ratios(centers, Yg, cfg.heat_times)
    rows += [(b.quantity, b.x1, b.x2, b.t, b.measured, b.bound_form) for b in brows]
    sm.info("gaussian_bounds", f"sup H t e^(|x-y|^2/(4t)) = {up:.4f}, inf = {lo:.3e}")

    # elementary time integral, also a test of the time engine
    el = 0.0
    for mm in (1.0, 2.0, 3.0):
        for p in (0.25, 1.0, 2.0):
            for Kc in (1.0, 4.0):
                v = elementary_time_integral(mm, p, Kc)
                ex = elementary_time_integral_exact(mm, p, Kc)
                el = max(el, abs(v - ex) / ex)
                rows.append(("elementary", mm, p, Kc, v, f"C_(K,m) p^-m = {ex!r}"))
    sm.check("elementary_estimate", el < 1e-10,
             f"time engine vs Gamma(m/2)(K/p^2)^(m/2), m in 1..3: max relative {el:.3e} (< 1e-10)")

    # interior cancellation of the translation defect
    x0 = np.array([math.pi / 2, math.pi / 2])
    d2 = (math.pi / 2) ** 2
    c_hat, C, norm = fit_cancellation_constant(x0, d2 * np.array([0.02, 0.05, 0.1, 0.2, 0.5, 1.0]))
    sm.info("cancellation_fit", f"at the center: C_hat = {c_hat:.4f}, C = {C:.4e}, "
            f"normalized range [{norm.min():.3e}, {norm.max():.3e}]")
    _write(out, "heat_oracle.csv", _rows_csv(["quantity", "x1", "x2", "t", "measured", "bound_form"], rows))
    return sm


# ------------------------------------------------------------------ commutators

def run_commutators(cfg: RunConfig, out: Path) -> Summary:
    sm = Summary("commutators")
    phi = _test_function(cfg)
    reports = []
    m = cfg.lemma_m
    levels = (2 * m, 4 * m, 8 * m)

    def lemma(seed):
        psi = random_field(build_basis(m), cfg.seed + seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OversamplingWarning)
            return [commutator_identity_residual(psi, phi, M) for M in levels]

    res = _ordered_map(lemma, range(cfg.lemma_seeds), _threads(cfg))
    decreasing, at8 = True, 0.0
    for seed, rs in enumerate(res):
        rel = [r.relative for r in rs]
        decreasing &= all(b < a for a, b in zip(rel[:-1], rel[1:]))
        at8 = max(at8, rel[-1])
        for r in rs:
            reports.append(["lemma_identity", f"seed={cfg.seed + seed}", r.M, repr(r.residual), repr(r.scale),
                            repr(r.relative)])
    sm.check("lemma_identity", decreasing and at8 < 1e-6,
             f"{cfg.lemma_seeds} random psi at m={m}: residual decreasing over M={levels}: {decreasing}; "
             f"max relative at M={8 * m}: {at8:.3e} (< 1e-6)")

    # [Lambda, chi] bound ratio: homogeneity and stability in M
    mb = cfg.bound_m
    psi = SpectralField.unit(build_basis(mb), 1, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OversamplingWarning)
        r4 = commutator_lambda_chi(phi, psi, 4 * mb, cfg.chi_p)[1]
        r8 = commutator_lambda_chi(phi, psi, 8 * mb, cfg.chi_p)[1]
        r8p = commutator_lambda_chi(phi, psi * 2.0, 8 * mb, cfg.chi_p)[1]
        r8c = commutator_lambda_chi(phi.scaled(2.0), psi, 8 * mb, cfg.chi_p)[1]
    for r, tag in ((r4, "e11"), (r8, "e11"), (r8p, "2*e11"), (r8c, "e11,2*chi")):
        reports.append(["lambda_chi", tag, r.M, repr(r.measured), repr(r.normalizer), repr(r.ratio)])
    hom = max(abs(r8p.ratio - r8.ratio), abs(r8c.ratio - r8.ratio)) / r8.ratio
    sm.check("bound_ratio_homogeneity", hom < 1e-12,
             f"ratio under psi -> 2 psi and chi -> 2 chi: max relative change {hom:.3e} (< 1e-12)")
    chg = abs(r8.ratio - r4.ratio) / r8.ratio
    sm.check("bound_ratio_stability", chg < 0.05,
             f"ratio {r4.ratio:.6f} at M={4 * mb} vs {r8.ratio:.6f} at M={8 * mb}: change {chg:.2%} (< 5%)")
    sm.info("bound_ratio_tail", f"chi*psi tail fraction at M={8 * mb}: {r8.extra['tail_fraction']:.3e}")

    # normalized [Lambda^s, grad] along the diagonal ladder
    e11 = SpectralField.unit(build_basis(1), 1, 1)
    pts = diagonal_ladder(cfg.ladder_levels)
    normalized, mag, d = frac_grad_normalized(e11, cfg.s, pts, cfg.p)
    for di, nv, mv in zip(d, normalized, mag):
        reports.append(["frac_grad_diagonal", f"d={di!r}", 0, repr(float(mv)), repr(float(di)), repr(float(nv))])
    spread = float(normalized.max() / normalized.min())
    sm.check("frac_grad_boundedness", spread < 10.0,
             f"normalized commutator along the diagonal, d = pi/4 ... pi/{4 * 2 ** (cfg.ladder_levels - 1)}: "
             f"max/min = {spread:.2f} (< 10); values {', '.join(f'{v:.3e}' for v in normalized)}")
    edge = np.stack([pts[:, 0], np.full(len(pts), math.pi / 2)], axis=1)
    en, _, _ = frac_grad_normalized(e11, cfg.s, edge, cfg.p)
    sm.info("frac_grad_edge_ray", f"along (d, pi/2): max/min = {en.max() / en.min():.2f}; "
            f"values {', '.join(f'{v:.3e}' for v in en)}")

    # cross-route: kernel quadrature vs heat-regularized spectral route
    ps = random_field(build_basis(cfg.lemma_m), cfg.seed)
    cpts = np.array([[math.pi / 2, math.pi / 2], [1.3, 1.7], [1.2, 1.2]])
    kv = commutator_frac_grad_kernel(ps, cfg.s, cpts)
    sv = commutator_frac_grad_spectral(ps, cfg.s, cpts)
    cr = _rel(kv, sv)
    sm.check("cross_route", cr < 1e-8, f"kernel vs spectral [Lambda^s, grad] psi at 3 interior points: "
             f"relative {cr:.3e} (< 1e-8)")
    _write(out, "commutator_report.csv", _rows_csv(REPORT_HEADER, reports))
    if cfg.figures:
        plotting.plot_commutator_ladder(d, normalized, out / "commutator_ladder.png")
    return sm


# ------------------------------------------------------------------ converge

def run_converge(cfg: RunConfig, out: Path) -> Summary:
    sm = Summary("converge")
    phi = _test_function(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TailWarning)
        table = projection_decay(phi, cfg.decay_k, cfg.decay_ladder)
    for w in caught:
        sm.info("decay_tail_warning", str(w.message))
    sm.check("projection_decay", table.strictly_decreasing,
             f"||phi - P_m phi||_({cfg.decay_k:g},D) on m={table.ladder}: "
             + ", ".join(f"{e:.3e}" for e in table.errors))
    sm.check("coefficient_decay", table.coefficients_bounded,
             f"max_j |phi_j| lambda_j^3 = {table.coefficient_sup:.4e} <= ||Lap^3 phi|| = "
             f"{table.coefficient_bound:.4e} over {table.analysis_modes} modes")
    sm.info("decay_local_rates", ", ".join(f"{r:.3f}" for r in table.local_rates)
            + f" (increasing: {table.superalgebraic}); tail fraction {table.tail_fraction:.2e}")

    kw = dict(ladder=cfg.ladder, recipe=_recipe(cfg), seed=cfg.seed, beta=cfg.init_beta, T=cfg.T,
              dt=cfg.dt, integrator=cfg.integrator, stride=cfg.stride, full_modes=cfg.full_modes,
              init_norm=cfg.init_norm, threads=_threads(cfg))
    study = run_study(**kw)
    text = study_csv(study, cfg.epsilon, phi, table)
    _write(out, "study.csv", text)
    again = study_csv(run_study(**kw), cfg.epsilon, phi, table)
    sm.check("determinism", text == again, "rerunning the ladder study gives a bit-identical study.csv")
    pc = padding_consistency(study)
    sm.check("padding_consistency", pc == 0.0, f"padded vs merged-map norm difference = {pc!r}")
    rows = cauchy_diagnostic(study, cfg.epsilon)
    sm.info("cauchy", "; ".join(f"{r.m_coarse}->{r.m_fine}: {r.sup_difference:.3e}" for r in rows))
    sm.info("H0_gap", ", ".join(f"m={m}: {v:.3e}" for m, v in initial_hamiltonian_gap(study).items()))
    sm.info("H_drift", ", ".join(f"m={m}: {v:.3e}" for m, v in hamiltonian_constancy(study).items()))

    # weak residual refinement and linearity
    th, _ = initial_data(cfg, cfg.weak_m)
    gam = assemble_gamma(th.basis, cfg.weak_m)
    coarse = weak_residual(run(th, cfg.weak_T, cfg.weak_dt, cfg.integrator, cfg.weak_stride, gam), phi)
    fine_tr = run(th, cfg.weak_T, cfg.weak_dt / 2, cfg.integrator, cfg.weak_stride, gam)
    fine = weak_residual(fine_tr, phi)
    sm.check("weak_residual_refinement", fine.magnitude < coarse.magnitude,
             f"m={cfg.weak_m}: |R| = {coarse.magnitude:.3e} at dt={cfg.weak_dt:g} -> "
             f"{fine.magnitude:.3e} at dt={cfg.weak_dt / 2:g} (snapshot density doubled)")
    scaled = weak_residual(fine_tr, phi.scaled(3.0))
    lin = abs(scaled.value - 3.0 * fine.value) / (3.0 * (abs(fine.time_term) + abs(fine.transport_term)))
    sm.check("weak_residual_linearity", lin < 1e-13,
             f"|R(3 phi) - 3 R(phi)| relative to the term magnitudes = {lin:.3e}")
    sm.info("weak_projection_gap", f"|transport(phi) - transport(P_m phi)| = {fine.projection_gap:.3e} "
            f"<= bound {fine.projection_bound:.3e}")
    _write(out, "weak_residual.csv", _rows_csv(
        ["dt", "residual", "time_term", "transport_term", "projection_gap", "projection_bound"],
        [(cfg.weak_dt, coarse.value, coarse.time_term, coarse.transport_term, coarse.projection_gap,
          coarse.projection_bound),
         (cfg.weak_dt / 2, fine.value, fine.time_term, fine.transport_term, fine.projection_gap,
          fine.projection_bound)]))
    if cfg.figures:
        plotting.plot_decay(table, out / "decay.png")
        plotting.plot_cauchy(rows, out / "cauchy.png")
    return sm


def _recipe(cfg: RunConfig):
    if cfg.init == "mode":
        return (cfg.init_p, cfg.init_q)
    if cfg.init == "bump":
        return _test_function(cfg).value
    return "random"


COMMANDS = {
    "simulate": run_simulate,
    "gamma": run_gamma,
    "commutators": run_commutators,
    "heat-oracle": run_heat_oracle,
    "converge": run_converge,
    "invariants": run_invariants,
}
