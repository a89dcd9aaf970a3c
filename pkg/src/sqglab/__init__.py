"""Spectral Galerkin laboratory for inviscid SQG on the square with Dirichlet data."""

from .eigenbasis import EigenBasis, EigenMode, build_basis
from .galerkin import CouplingTensor, TrajectoryRecord, assemble_gamma, run
from .spectral import SpectralField, frac_apply, sobolev_norm

__all__ = [
    "EigenBasis", "EigenMode", "build_basis", "CouplingTensor", "TrajectoryRecord", "assemble_gamma",
    "run", "SpectralField", "frac_apply", "sobolev_norm",
]
__version__ = "0.1.0"
