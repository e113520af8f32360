"""Full diagonalization, energy rescaling, binning, energy shells, and the eigenpair cache."""

from __future__ import annotations

import hashlib
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import CacheError, EmptyShellError, InvalidArgument, NumericalFailure
from .fock import (
    BASIS_ORDER_VERSION,
    FockBasis,
    HamiltonianMatrix,
    ModelParams,
    build_basis,
    build_hamiltonian,
)

log = logging.getLogger(__name__)

MAGIC = b"BHT1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sqqdddq")
_CHECKSUM_BYTES = 8

RESIDUAL_TOL = 1e-8
ORTHO_TOL = 1e-8


@dataclass(eq=False)
class Spectrum:
    """Ascending eigenvalues and real orthonormal eigenvectors (column ``nu`` <-> ``energies[nu]``)."""

    params: ModelParams
    energies: np.ndarray
    eigenvectors: np.ndarray
    basis: FockBasis = field(repr=False)

    def __post_init__(self):
        self.energies.flags.writeable = False
        self.eigenvectors.flags.writeable = False

    @property
    def size(self) -> int:
        return len(self.energies)

    @property
    def fingerprint(self) -> str:
        return self.basis.fingerprint()

    def vector(self, nu: int) -> np.ndarray:
        if not -self.size <= nu < self.size:
            raise IndexError(f"eigenstate index {nu} out of range for size {self.size}")
        return self.eigenvectors[:, nu]

    def scale(self) -> "EnergyScale":
        return rescale_energies(self)

    @property
    def rescaled(self) -> np.ndarray:
        return self.scale()(self.energies)


def _fix_signs(vecs: np.ndarray) -> None:
    rows = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[rows, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs *= signs


def check_spectrum(H: np.ndarray, energies: np.ndarray, vecs: np.ndarray) -> tuple[float, float]:
    """Return ``(max relative residual, max orthonormality defect)``."""
    hnorm = max(np.abs(energies).max(), np.finfo(float).tiny)
    resid = np.linalg.norm(H @ vecs - vecs * energies, axis=0).max() / hnorm
    gram = vecs.T @ vecs
    gram[np.diag_indices_from(gram)] -= 1.0
    return float(resid), float(np.abs(gram).max())


def diagonalize(H: HamiltonianMatrix, check: bool = True) -> Spectrum:
    """Dense divide-and-conquer eigensolve of the trimer Hamiltonian.

    Each eigenvector's largest-magnitude component is made positive.  Within
    exactly degenerate subspaces the basis is whatever LAPACK returns.
    """
    M = np.asarray(H.matrix)
    try:
        energies, vecs = linalg.eigh(M, driver="evd", check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalFailure(f"symmetric eigensolver failed: {exc}") from exc
    vecs = np.ascontiguousarray(vecs)
    _fix_signs(vecs)
    if check:
        resid, ortho = check_spectrum(M, energies, vecs)
        if resid > RESIDUAL_TOL or ortho > ORTHO_TOL:
            raise NumericalFailure(
                f"eigenpairs out of tolerance: residual {resid:.2e}, orthonormality {ortho:.2e}",
                residual=max(resid, ortho),
            )
    return Spectrum(H.params, energies, vecs, H.basis)


def compute_spectrum(params: ModelParams, check: bool = True) -> Spectrum:
    basis = build_basis(params.N)
    return diagonalize(build_hamiltonian(basis, params), check=check)


@dataclass(frozen=True)
class EnergyScale:
    e_min: float
    e_max: float

    def __call__(self, E):
        return (np.asarray(E, dtype=float) - self.e_min) / (self.e_max - self.e_min)

    def inverse(self, e_tilde):
        return self.e_min + np.asarray(e_tilde, dtype=float) * (self.e_max - self.e_min)


def rescale_energies(spectrum: Spectrum) -> EnergyScale:
    E = spectrum.energies
    if len(E) < 2 or not E[-1] > E[0]:
        raise InvalidArgument("cannot rescale a spectrum with E_max == E_min")
    return EnergyScale(float(E[0]), float(E[-1]))


def bin_index(e_tilde, nbins: int) -> np.ndarray:
    """Bin of each rescaled energy; bin ``b`` covers ``[b/nbins, (b+1)/nbins)``, last bin closed."""
    idx = np.floor(np.asarray(e_tilde) * nbins).astype(int)
    return np.clip(idx, 0, nbins - 1)


def bin_average(spectrum: Spectrum, nbins: int, values, return_counts: bool = False):
    """Mean of per-state ``values`` in equal-width bins of the rescaled energy.

    Empty bins are NaN.
    """
    if int(nbins) != nbins or nbins < 1:
        raise InvalidArgument(f"nbins must be a positive integer, got {nbins!r}")
    values = np.asarray(values, dtype=float)
    if values.shape != (spectrum.size,):
        raise InvalidArgument(f"expected {spectrum.size} values, got shape {values.shape}")
    b = bin_index(spectrum.rescaled, nbins)
    counts = np.bincount(b, minlength=nbins)
    sums = np.bincount(b, weights=values, minlength=nbins)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return (means, counts) if return_counts else means


@dataclass
class EnergyShell:
    members: np.ndarray
    interval: tuple[float, float]
    mean_intensities: np.ndarray
    n_eff: float

    @property
    def center(self) -> float:
        return 0.5 * (self.interval[0] + self.interval[1])

    def __len__(self) -> int:
        return len(self.members)


def shell_from_members(spectrum: Spectrum, members) -> EnergyShell:
    members = np.asarray(members, dtype=int)
    if members.size == 0:
        raise EmptyShellError("energy shell has no member eigenstates")
    X = spectrum.eigenvectors[:, members] ** 2
    mean = X.mean(axis=1)
    et = spectrum.rescaled[members]
    return EnergyShell(members, (float(et.min()), float(et.max())), mean, float(1.0 / np.sum(mean**2)))


def energy_shell(spectrum: Spectrum, window=None, *, center: float | None = None, count: int = 100) -> EnergyShell:
    """Eigenstates in a rescaled-energy interval ``window=(lo, hi)``, or the
    ``count`` states closest to ``center`` (in rescaled energy)."""
    et = spectrum.rescaled
    if window is not None:
        lo, hi = window
        members = np.nonzero((et >= lo) & (et <= hi))[0]
        if members.size == 0:
            raise EmptyShellError(f"no eigenstates with rescaled energy in [{lo}, {hi}]")
        shell = shell_from_members(spectrum, members)
        shell.interval = (float(lo), float(hi))
        return shell
    if center is None:
        raise InvalidArgument("give either a window or a center")
    if count < 1:
        raise InvalidArgument("count must be positive")
    k = int(np.searchsorted(et, center))
    lo = int(np.clip(k - count // 2, 0, max(spectrum.size - count, 0)))
    return shell_from_members(spectrum, np.arange(lo, min(lo + count, spectrum.size)))


# -- cache -------------------------------------------------------------------


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=_CHECKSUM_BYTES).digest()


def cache_key(params: ModelParams) -> str:
    return (
        f"bht_N{params.N}_u{params.u!r}_v{params.v!r}_om{params.omega!r}"
        f"_b{BASIS_ORDER_VERSION}_f{FORMAT_VERSION}.bin"
    )


def encode_spectrum(spectrum: Spectrum) -> bytes:
    p = spectrum.params
    n = spectrum.size
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, p.N, p.u, p.v, p.omega, n)
    body = (
        header
        + spectrum.energies.astype("<f8").tobytes()
        + np.asarray(spectrum.eigenvectors, dtype="<f8").tobytes(order="F")
    )
    return body + _checksum(body)


def decode_spectrum(data: bytes) -> Spectrum:
    if len(data) < _HEADER.size + _CHECKSUM_BYTES:
        raise CacheError("truncated spectrum file")
    magic, version, N, u, v, omega, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CacheError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CacheError(f"stale cache format version {version} (expected {FORMAT_VERSION})")
    body, digest = data[:-_CHECKSUM_BYTES], data[-_CHECKSUM_BYTES:]
    if len(body) != _HEADER.size + 8 * (n + n * n):
        raise CacheError("spectrum file length does not match its header")
    if _checksum(body) != digest:
        raise CacheError("checksum mismatch")
    params = ModelParams(N, u, v, omega)
    basis = build_basis(N)
    if basis.size != n:
        raise CacheError(f"dimension {n} inconsistent with N={N}")
    off = _HEADER.size
    energies = np.frombuffer(body, dtype="<f8", count=n, offset=off).astype(float)
    vecs = np.frombuffer(body, dtype="<f8", count=n * n, offset=off + 8 * n)
    vecs = np.array(vecs.reshape((n, n), order="F"), dtype=float, order="C")
    return Spectrum(params, energies, vecs, basis)


def save_spectrum(spectrum: Spectrum, path) -> Path:
    """Write atomically: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(encode_spectrum(spectrum))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_spectrum(path, params: ModelParams | None = None) -> Spectrum:
    spectrum = decode_spectrum(Path(path).read_bytes())
    if params is not None and spectrum.params != params:
        raise CacheError(f"cache holds {spectrum.params}, requested {params}")
    return spectrum


class SpectrumCache:
    """Directory of eigenpair files keyed by parameters and format versions."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def path(self, params: ModelParams) -> Path:
        return self.directory / cache_key(params)

    def get(self, params: ModelParams, check: bool = True) -> Spectrum:
        path = self.path(params)
        if path.exists():
            try:
                return load_spectrum(path, params)
            except CacheError as exc:
                log.warning("discarding cache file %s: %s", path, exc)
        spectrum = compute_spectrum(params, check=check)
        save_spectrum(spectrum, path)
        return spectrum


def get_spectrum(params: ModelParams, cache_dir=None, check: bool = True) -> Spectrum:
    if cache_dir is None:
        return compute_spectrum(params, check=check)
    return SpectrumCache(cache_dir).get(params, check=check)
