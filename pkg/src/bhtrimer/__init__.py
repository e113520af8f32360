"""Bose-Hubbard trimer: many-body spectra, SU(3) phasespace and mean-field chaos."""

from .errors import (
    CacheError,
    EmptyShellError,
    GradientSingularity,
    InvalidArgument,
    NumericalFailure,
    TrimerError,
)
from .fock import FockBasis, ModelParams, build_basis, build_hamiltonian, build_sparse_hamiltonian, dimension
from .spectral import Spectrum, compute_spectrum, energy_shell, get_spectrum

__all__ = [
    "CacheError",
    "EmptyShellError",
    "FockBasis",
    "GradientSingularity",
    "InvalidArgument",
    "ModelParams",
    "NumericalFailure",
    "Spectrum",
    "TrimerError",
    "build_basis",
    "build_hamiltonian",
    "build_sparse_hamiltonian",
    "compute_spectrum",
    "dimension",
    "energy_shell",
    "get_spectrum",
]
