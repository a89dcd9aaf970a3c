"""Dirichlet heat kernel of the square and heat-semigroup subordination.

Two independent evaluations of the kernel H(x, y, t) are provided:

* ``eigen_sum``: sum_j exp(-lambda_j t) w_j(x) w_j(y) over canonical modes;
* ``image_series``: product of 1D interval kernels, each a signed sum of
  reflected free Gaussians.

Fractional powers are recovered from the heat semigroup through

    lambda^(s/2) = c_s int_0^inf t^(-1-s/2) (1 - exp(-t lambda)) dt,

integrated with composite Gauss-Legendre in u = log t and closed-form tails.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .eigenbasis import NORM, basis_covering, build_basis, distance_to_boundary
from .spectral import SpectralField, heat_defect

TRUNC_EXPONENT = -math.log(1e-16)  # exp(-36.84) = 1e-16
LAMBDA_1 = 2.0


class HeatKernelWarning(UserWarning):
    pass


# ----------------------------------------------------------- time quadrature

@dataclass(frozen=True)
class TimeRule:
    """Nodes/weights for int_{t_lo}^{t_hi} g(t) dt via composite GL in log t."""

    t: np.ndarray
    w: np.ndarray
    t_lo: float
    t_hi: float


def log_time_rule(t_lo: float, t_hi: float, panels_per_decade: int = 3, order: int = 20) -> TimeRule:
    if not 0 < t_lo < t_hi:
        raise ValueError("need 0 < t_lo < t_hi")
    u0, u1 = math.log(t_lo), math.log(t_hi)
    npan = max(1, int(math.ceil(panels_per_decade * (u1 - u0) / math.log(10.0))))
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(u0, u1, npan + 1)
    h = np.diff(edges)
    u = (edges[:-1, None] + 0.5 * h[:, None] * (xg[None, :] + 1.0)).ravel()
    wu = (0.5 * h[:, None] * wg[None, :]).ravel()
    t = np.exp(u)
    return TimeRule(t, wu * t, t_lo, t_hi)


def t_max_for(lam_min: float = LAMBDA_1) -> float:
    """Horizon beyond which exp(-lam_min t) < 1e-16."""
    return TRUNC_EXPONENT / lam_min


def compute_cs(s: float) -> float:
    """Normalization constant c_s of the subordination formula.

    From int_0^inf t^(-1-a)(1 - e^{-t}) dt = Gamma(1-a)/a with a = s/2.
    """
    if not 0.0 < s < 2.0:
        raise ValueError(f"subordination requires 0 < s < 2, got s={s}")
    a = 0.5 * s
    return a / gamma(1.0 - a)


def _left_tail(lam: np.ndarray, s: float, t_lo: float, terms: int = 8) -> np.ndarray:
    # int_0^{t_lo} t^{-1-s/2}(1-e^{-lam t}) dt termwise from the exponential series
    a = 0.5 * s
    out = np.zeros_like(lam, dtype=float)
    term_fact = 1.0
    for k in range(1, terms + 1):
        term_fact *= k
        out += (-1) ** (k + 1) * lam ** k / term_fact * t_lo ** (k - a) / (k - a)
    return out


@dataclass
class SubordinationRule:
    s: float
    c_s: float
    rule: TimeRule
    lam_max: float

    def tail_estimate(self, lam_min: float = LAMBDA_1) -> float:
        """Bound on the neglected pieces (right-tail exponential, left series)."""
        a = 0.5 * self.s
        right = math.exp(-lam_min * self.rule.t_hi) * self.rule.t_hi ** (-1 - a) / lam_min
        x = self.lam_max * self.rule.t_lo
        left = x ** 9 / math.factorial(9) * self.rule.t_lo ** (-a) / (9 - a)
        return self.c_s * (right + left)

    def apply_scalar(self, lam) -> np.ndarray:
        """lambda^(s/2) recovered through the time integral."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        a = 0.5 * self.s
        t, w = self.rule.t, self.rule.w
        body = (t ** (-1 - a) * w) @ (-np.expm1(-np.outer(t, lam)))
        left = _left_tail(lam, self.s, self.rule.t_lo)
        right = self.rule.t_hi ** (-a) / a
        return self.c_s * (body + left + right)


def subordination_rule(s: float, lam_max: float, lam_min: float = LAMBDA_1,
                       panels_per_decade: int = 3, order: int = 20) -> SubordinationRule:
    c_s = compute_cs(s)
    t_lo = 1e-3 / max(lam_max, 1.0)
    t_hi = t_max_for(lam_min)
    return SubordinationRule(s, c_s, log_time_rule(t_lo, t_hi, panels_per_decade, order), lam_max)


def normalization_integral(s: float) -> float:
    """c_s int_0^inf t^{-1-s/2}(1 - e^{-t}) dt evaluated with the time engine."""
    rule = subordination_rule(s, lam_max=1.0, lam_min=1.0)
    return float(rule.apply_scalar(1.0)[0])


@dataclass
class SubordinationResult:
    field: SpectralField
    tail_estimate: float


def frac_via_subordination(f: SpectralField, s: float, **rule_kw) -> SubordinationResult:
    """Lambda^s f = c_s int t^{-1-s/2} (f - e^{t Delta} f) dt, integrated over
    heat-semigroup evaluations at the time nodes."""
    lam = f.basis.lam.astype(float)
    rule = subordination_rule(s, lam_max=float(lam.max()), lam_min=float(lam.min()), **rule_kw)
    a = 0.5 * s
    acc = np.zeros(len(f))
    for tk, wk in zip(rule.rule.t, rule.rule.w):
        acc += (wk * tk ** (-1 - a)) * heat_defect(f, tk).coeffs
    acc += _left_tail(lam, s, rule.rule.t_lo) * f.coeffs
    acc += rule.rule.t_hi ** (-a) / a * f.coeffs
    return SubordinationResult(SpectralField(f.basis, rule.c_s * acc),
                               rule.tail_estimate(float(lam.min())) * float(np.abs(f.coeffs).sum()))


def elementary_time_integral(m: float, p: float, K: float, rule: TimeRule | None = None) -> float:
    """int_0^inf t^{-1-m/2} exp(-p^2/(K t)) dt by the time engine."""
    a = 0.5 * m
    tau = p * p / K
    if rule is None:
        rule = log_time_rule(tau * 1e-3, tau * 1e8, panels_per_decade=4, order=20)
    body = float(np.sum(rule.w * rule.t ** (-1 - a) * np.exp(-tau / rule.t)))
    # right tail: exp(-tau/t) ~ 1 beyond t_hi
    return body + rule.t_hi ** (-a) / a


def elementary_time_integral_exact(m: float, p: float, K: float) -> float:
    """Closed form Gamma(m/2) (K/p^2)^(m/2)."""
    return gamma(0.5 * m) * (K / (p * p)) ** (0.5 * m)


# ----------------------------------------------------------- 1D kernels

def image_count(t: float) -> int:
    """Images per side so that exp(-(2 pi N)^2 / (4t)) < 1e-16 (with margin)."""
    return max(1, int(math.ceil(math.sqrt(4.0 * t * (TRUNC_EXPONENT + 3.0)) / (2 * math.pi))))


def _gauss(z, t):
    return np.exp(-z * z / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


def interval_kernel(x, y, t: float):
    """1D Dirichlet kernel on (0, pi) and its x, y derivatives (image series).

    Returns (h, dh/dx, dh/dy).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    N = image_count(t)
    h = np.zeros(np.broadcast(x, y).shape)
    hx = np.zeros_like(h)
    hy = np.zeros_like(h)
    for n in range(-N, N + 1):
        zd = x - y + 2 * math.pi * n
        zr = x + y + 2 * math.pi * n
        gd, gr = _gauss(zd, t), _gauss(zr, t)
        dgd, dgr = -zd / (2 * t) * gd, -zr / (2 * t) * gr
        h += gd - gr
        hx += dgd - dgr
        hy += -dgd - dgr
    return h, hx, hy


def interval_kernel_translation_defect(x, y, t: float):
    """(d/dx + d/dy) of the 1D kernel.

    Direct images depend on x - y only and drop out exactly, leaving
    -2 sum_n G'(x + y + 2 pi n).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    N = image_count(t)
    out = np.zeros(np.broadcast(x, y).shape)
    for n in range(-N, N + 1):
        zr = x + y + 2 * math.pi * n
        out += zr / t * _gauss(zr, t)
    return out


# ----------------------------------------------------------- 2D kernel

@dataclass
class HeatKernelEval:
    t: float
    method: str
    truncation: int
    H: np.ndarray
    grad_x: np.ndarray = field(repr=False)
    grad_y: np.ndarray = field(repr=False)


def _pairs(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    if x.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    return x, y


def kernel_eval(x, y, t: float, method: str = "image_series", max_modes: int | None = None) -> HeatKernelEval:
    """H(x, y, t), grad_x H and grad_y H at point pairs (trailing axis = coordinates)."""
    if t <= 0:
        raise ValueError("heat kernel time must be positive")
    x, y = _pairs(x, y)
    if method == "image_series":
        h1, h1x, h1y = interval_kernel(x[..., 0], y[..., 0], t)
        h2, h2x, h2y = interval_kernel(x[..., 1], y[..., 1], t)
        H = h1 * h2
        gx = np.stack([h1x * h2, h1 * h2x], axis=-1)
        gy = np.stack([h1y * h2, h1 * h2y], axis=-1)
        return HeatKernelEval(t, method, image_count(t), H, gx, gy)
    if method == "eigen_sum":
        lam_cut = TRUNC_EXPONENT / t
        basis = basis_covering(lam_cut)
        if max_modes is not None and len(basis) > max_modes:
            warnings.warn(f"eigen_sum at t={t} needs {len(basis)} modes (> {max_modes}); "
                          "truncation tolerance not reached, prefer image_series",
                          HeatKernelWarning, stacklevel=2)
            basis = build_basis(max_modes)
        p = basis.p.astype(float)
        q = basis.q.astype(float)
        decay = np.exp(-basis.lam * t) * NORM * NORM
        sx1, sx2 = np.sin(np.multiply.outer(x[..., 0], p)), np.sin(np.multiply.outer(x[..., 1], q))
        sy1, sy2 = np.sin(np.multiply.outer(y[..., 0], p)), np.sin(np.multiply.outer(y[..., 1], q))
        cx1, cx2 = np.cos(np.multiply.outer(x[..., 0], p)), np.cos(np.multiply.outer(x[..., 1], q))
        cy1, cy2 = np.cos(np.multiply.outer(y[..., 0], p)), np.cos(np.multiply.outer(y[..., 1], q))
        wy = sy1 * sy2
        wx = sx1 * sx2
        H = (wx * wy) @ decay
        gx = np.stack([(cx1 * sx2 * wy) @ (decay * p), (sx1 * cx2 * wy) @ (decay * q)], axis=-1)
        gy = np.stack([(wx * cy1 * sy2) @ (decay * p), (wx * sy1 * cy2) @ (decay * q)], axis=-1)
        return HeatKernelEval(t, method, len(basis), H, gx, gy)
    raise ValueError(f"unknown kernel method {method!r}; expected 'eigen_sum' or 'image_series'")


def sample_pairs(n: int = 25, spread: float = 0.15, margin: float = 0.3) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic interior point pairs for kernel cross-checks.

    x runs over a grid on [margin, pi - margin]^2 and y = x + spread (cos a, sin a)
    with the angle a advancing per pair.  Separations stay small so that H is
    well above the absolute round-off floor of the eigen sum (about eps / (4 pi t))
    even at t = 0.01, where a per-pair relative comparison is meaningful.
    """
    side = int(math.ceil(math.sqrt(n)))
    g = np.linspace(margin, math.pi - margin, side)
    x = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)[:n]
    a = 2 * math.pi * np.arange(n) / n
    y = np.clip(x + spread * np.stack([np.cos(a), np.sin(a)], axis=-1), 0.05, math.pi - 0.05)
    return x, y


def translation_defect(x, y, t: float) -> np.ndarray:
    """(grad_x + grad_y) H(x, y, t) from the image series, free part cancelled."""
    x, y = _pairs(x, y)
    h1, _, _ = interval_kernel(x[..., 0], y[..., 0], t)
    h2, _, _ = interval_kernel(x[..., 1], y[..., 1], t)
    d1 = interval_kernel_translation_defect(x[..., 0], y[..., 0], t)
    d2 = interval_kernel_translation_defect(x[..., 1], y[..., 1], t)
    return np.stack([d1 * h2, h1 * d2], axis=-1)


def free_translation_defect(x, y, t: float) -> np.ndarray:
    """(grad_x + grad_y) of the whole-plane Gaussian kernel; identically zero."""
    x, y = _pairs(x, y)
    z = x - y
    G = np.exp(-np.sum(z * z, axis=-1) / (4 * t)) / (4 * math.pi * t)
    grad_x = -z / (2 * t) * G[..., None]
    grad_y = z / (2 * t) * G[..., None]
    return grad_x + grad_y


def disc_samples(x, radius: float, n_r: int = 12, n_theta: int = 32) -> np.ndarray:
    r = radius * np.arange(0, n_r + 1) / n_r
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    R, TH = np.meshgrid(r[1:], th, indexing="ij")
    pts = np.stack([x[0] + R * np.cos(TH), x[1] + R * np.sin(TH)], axis=-1).reshape(-1, 2)
    return np.vstack([np.asarray(x, dtype=float)[None, :], pts])


def cancellation_profile(x, t: float, n_r: int = 12, n_theta: int = 32) -> float:
    """sup over |x - y| <= d(x)/10 of |(grad_x + grad_y) H(x, y, t)|, for t <= d(x)^2."""
    x = np.asarray(x, dtype=float)
    d = float(distance_to_boundary(x[0], x[1]))
    if d <= 0:
        raise ValueError("cancellation profile needs an interior point")
    if t > d * d:
        raise ValueError(f"t={t} exceeds d(x)^2={d * d}; the short-time estimate does not apply")
    ys = disc_samples(x, d / 10.0, n_r, n_theta)
    v = translation_defect(x[None, :], ys, t)
    return float(np.max(np.linalg.norm(v, axis=-1)))


def fit_cancellation_constant(x, ts) -> tuple[float, float, np.ndarray]:
    """Fit profile(t) ~ C t^{-3/2} exp(-d^2/(C_hat t)) on the given times.

    Returns (C_hat, C, normalized) where normalized = profile t^{3/2} e^{d^2/(C_hat t)}.
    """
    x = np.asarray(x, dtype=float)
    d = float(distance_to_boundary(x[0], x[1]))
    ts = np.asarray(ts, dtype=float)
    prof = np.array([cancellation_profile(x, t) for t in ts])
    yv = np.log(prof) + 1.5 * np.log(ts)
    slope, intercept = np.polyfit(1.0 / ts, yv, 1)
    c_hat = -d * d / slope
    normalized = prof * ts ** 1.5 * np.exp(d * d / (c_hat * ts))
    return float(c_hat), float(math.exp(intercept)), normalized


# ----------------------------------------------------------- bound measurements

@dataclass
class BoundRow:
    quantity: str
    x1: float
    x2: float
    t: float
    measured: float
    bound_form: str


def gaussian_bound_ratios(xs, ys, ts, K_upper: float = 4.0, K_lower: float = 4.0):
    """Measured H t^{d/2} e^{|x-y|^2/(K t)} on the sample set.

    Returns (sup with K_upper, inf with K_lower, rows).
    """
    rows = []
    up, lo = 0.0, math.inf
    for t in ts:
        for x in xs:
            yv = np.asarray(ys)
            ev = kernel_eval(np.broadcast_to(x, yv.shape), yv, t)
            r2 = np.sum((yv - x) ** 2, axis=-1)
            ru = ev.H * t * np.exp(r2 / (K_upper * t))
            rl = ev.H * t * np.exp(r2 / (K_lower * t))
            up = max(up, float(ru.max()))
            lo = min(lo, float(rl.min()))
            rows.append(BoundRow("H_upper", float(x[0]), float(x[1]), t, float(ru.max()),
                                 f"C t^-1 exp(-|x-y|^2/({K_upper} t))"))
            rows.append(BoundRow("H_lower", float(x[0]), float(x[1]), t, float(rl.min()),
                                 f"c t^-1 exp(-|x-y|^2/({K_lower} t))"))
    return up, lo, rows


def gradient_bound_ratio(xs, ys, ts, K: float = 8.0):
    """sup |grad_x H| t^{3/2} e^{|x-y|^2/(K t)} over the sample set, and rows."""
    rows = []
    best = 0.0
    for t in ts:
        for x in xs:
            yv = np.asarray(ys)
            ev = kernel_eval(np.broadcast_to(x, yv.shape), yv, t)
            r2 = np.sum((yv - x) ** 2, axis=-1)
            ratio = np.linalg.norm(ev.grad_x, axis=-1) * t ** 1.5 * np.exp(r2 / (K * t))
            best = max(best, float(ratio.max()))
            rows.append(BoundRow("gradH", float(x[0]), float(x[1]), t, float(ratio.max()),
                                 f"C t^-3/2 exp(-|x-y|^2/({K} t))"))
    return best, rows
