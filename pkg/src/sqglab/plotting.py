"""Figures written next to the CSV artifacts.

Convenience output only; nothing is asserted about the images.  The Agg
backend is used and SVG metadata is pinned so that reruns produce identical
files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .quadrature import uniform_grid  # noqa: E402
from .spectral import SpectralField, synthesize  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "sqglab"
_META_SVG = {"Date": None, "Creator": "sqglab"}
_META_PNG = {"Software": "sqglab"}


def _save(fig, path: Path):
    path = Path(path)
    meta = _META_SVG if path.suffix == ".svg" else _META_PNG
    fig.savefig(path, metadata=meta, dpi=110)
    plt.close(fig)
    return path


def plot_invariants(traj, path):
    """Relative drift of E_m and H_m along a trajectory."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for name, v in (("E", traj.energy), ("H", traj.hamiltonian)):
        rel = np.abs(v - v[0]) / abs(v[0]) if v[0] != 0 else np.abs(v)
        ax.semilogy(traj.times, np.maximum(rel, 1e-18), label=f"|{name}(t)-{name}(0)|/{name}(0)")
    ax.set_xlabel("t")
    ax.set_title(f"invariant drift, m={traj.m}")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_theta(theta: SpectralField, path, n: int = 129, title: str = ""):
    """Contour snapshot of theta on a uniform grid."""
    g = uniform_grid(n)
    v = synthesize(theta, g).values
    fig, ax = plt.subplots(figsize=(4.5, 4))
    cs = ax.contourf(g.x, g.y, v.T, levels=21, cmap="RdBu_r")
    fig.colorbar(cs, ax=ax)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_drift_order(dts, drifts, slope: float, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(dts, drifts, "o-", label=f"slope {slope:.2f}")
    ax.set_xlabel("dt")
    ax.set_ylabel("max relative energy drift")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_decay(table, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(table.ladder, table.errors, "o-")
    ax.set_xlabel("m")
    ax.set_ylabel(f"||phi - P_m phi||_{{{table.k:g},D}}")
    fig.tight_layout()
    return _save(fig, path)


def plot_commutator_ladder(d, normalized, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(d, normalized, "o-")
    ax.set_xlabel("d(x)")
    ax.set_ylabel("normalized commutator")
    fig.tight_layout()
    return _save(fig, path)


def plot_cauchy(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog([r.m_fine for r in rows], [r.sup_difference for r in rows], "o-")
    ax.set_xlabel("finer level m'")
    ax.set_ylabel("sup_t ||psi_m' - psi_m||")
    fig.tight_layout()
    return _save(fig, path)
