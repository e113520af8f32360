"""SU(3) coherent states, Husimi projections, and one-particle observables."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidArgument
from .fock import FockBasis, build_basis

SIMPLEX_TOL = 1e-12
SP_SPINOR = np.array([1.0, 0.0, -1.0]) / math.sqrt(2.0)


@dataclass(frozen=True)
class PhasePoint:
    """Reduced phasespace point: angles relative to site 3 and populations ``n_i / N``."""

    q1: float
    q2: float
    p1: float
    p2: float

    def __post_init__(self):
        if self.p1 < -SIMPLEX_TOL or self.p2 < -SIMPLEX_TOL or self.p1 + self.p2 > 1 + SIMPLEX_TOL:
            raise InvalidArgument(f"({self.p1}, {self.p2}) lies outside the population simplex")

    @property
    def p3(self) -> float:
        return max(0.0, 1.0 - self.p1 - self.p2)

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.p1, self.p2])

    def mirrored(self) -> "PhasePoint":
        """Image under the site 1 <-> site 3 reflection."""
        # angles are measured from site 3, so re-reference them to the old site 1
        p3 = self.p3
        return PhasePoint(-self.q1, self.q2 - self.q1, p3, self.p2)


@dataclass(frozen=True)
class CoherentState:
    spinor: np.ndarray
    N: int

    def __post_init__(self):
        s = np.asarray(self.spinor, dtype=complex)
        if s.shape != (3,):
            raise InvalidArgument("spinor must have three components")
        norm = np.linalg.norm(s)
        if abs(norm - 1.0) > 1e-10:
            raise InvalidArgument(f"spinor norm is {norm}, expected 1")
        object.__setattr__(self, "spinor", s)

    def amplitudes(self, basis: FockBasis | None = None) -> np.ndarray:
        return fock_amplitudes(self.spinor, basis if basis is not None else build_basis(self.N))


def phasepoint_to_spinor(point: PhasePoint, N: int = 1) -> CoherentState:
    """``(sqrt(p1) e^{i q1}, sqrt(p2) e^{i q2}, sqrt(p3))``; the third component is the real gauge."""
    s = np.array(
        [
            math.sqrt(max(point.p1, 0.0)) * np.exp(1j * point.q1),
            math.sqrt(max(point.p2, 0.0)) * np.exp(1j * point.q2),
            math.sqrt(point.p3),
        ]
    )
    return CoherentState(s / np.linalg.norm(s), N)


def spinor_to_phasepoint(spinor) -> PhasePoint:
    z = np.asarray(spinor, dtype=complex)
    z = z / np.linalg.norm(z)
    p = np.abs(z) ** 2
    ph = np.angle(z)
    return PhasePoint(
        float(np.angle(np.exp(1j * (ph[0] - ph[2])))),
        float(np.angle(np.exp(1j * (ph[1] - ph[2])))),
        float(p[0]),
        float(p[1]),
    )


def sp_state(N: int) -> CoherentState:
    """All particles in the dark orbital ``(|1> - |3>)/sqrt(2)``."""
    return CoherentState(SP_SPINOR.astype(complex), N)


def fock_amplitudes(spinor, basis: FockBasis) -> np.ndarray:
    """``<n|alpha>`` for every basis state, built from log-magnitudes and phases."""
    a = np.asarray(spinor, dtype=complex)
    mag = np.abs(a)
    occ = basis.occupations
    N = basis.N
    log_mult = 0.5 * (gammaln(N + 1) - gammaln(occ + 1).sum(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mag = np.log(mag)
        # 0 * log 0 := 0; any positive power of a vanishing component kills the term
        terms = np.where(occ > 0, occ * log_mag, 0.0)
    log_abs = log_mult + terms.sum(axis=1)
    phase = occ @ np.angle(a)
    return np.exp(log_abs) * np.exp(1j * phase)


def fock_overlap(state: CoherentState, n) -> complex:
    n1, n2, n3 = (int(x) for x in n)
    if n1 + n2 + n3 != state.N or min(n1, n2, n3) < 0:
        raise InvalidArgument(f"Fock state {tuple(n)} does not hold N={state.N} particles")
    a = state.spinor
    log_abs = 0.5 * (gammaln(state.N + 1) - gammaln(n1 + 1) - gammaln(n2 + 1) - gammaln(n3 + 1))
    phase = 0.0
    for k, ak in zip((n1, n2, n3), a):
        if k == 0:
            continue
        if ak == 0:
            return 0j
        log_abs += k * math.log(abs(ak))
        phase += k * np.angle(ak)
    return complex(math.exp(log_abs) * np.exp(1j * phase))


def overlaps_with(spectrum, amplitudes: np.ndarray, members=None) -> np.ndarray:
    """``|<alpha|E_nu>|^2`` for each eigenstate (or each of ``members``)."""
    V = spectrum.eigenvectors if members is None else spectrum.eigenvectors[:, members]
    amp = np.conj(amplitudes)
    return np.abs(amp @ V) ** 2


def husimi(spectrum, nu: int, point) -> float:
    spinor = point.spinor if isinstance(point, CoherentState) else phasepoint_to_spinor(point).spinor
    amp = fock_amplitudes(spinor, spectrum.basis)
    return float(abs(np.dot(np.conj(amp), spectrum.vector(nu))) ** 2)


def sp_overlap_all(spectrum):
    """``(nu_star, Q)``: the SP-supported eigenstate and overlaps of every eigenstate with the dark state."""
    Q = overlaps_with(spectrum, fock_amplitudes(SP_SPINOR, spectrum.basis))
    return int(np.argmax(Q)), Q


def one_particle_density_vector(vec, basis: FockBasis) -> np.ndarray:
    """``rho_ij = <a_i^+ a_j> / N`` for a (possibly complex) Fock-space vector."""
    c = np.asarray(vec)
    c = c / np.linalg.norm(c)
    occ = basis.occupations
    w = np.abs(c) ** 2
    rho = np.zeros((3, 3), dtype=complex)
    rho[np.diag_indices(3)] = w @ occ
    for j in range(3):
        for i in range(3):
            if i == j:
                continue
            # a_i^+ a_j |n> = amp |n'>, so <a_i^+ a_j> = sum conj(c[n']) c[n] amp
            src, dst, amp = basis.hop_pairs(j, i)
            rho[i, j] = np.sum(np.conj(c[dst]) * c[src] * amp)
    return rho / basis.N


def one_particle_density(spectrum, nu: int) -> np.ndarray:
    rho = one_particle_density_vector(spectrum.vector(nu), spectrum.basis)
    return rho.real if np.allclose(rho.imag, 0) else rho


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho)))


def site_expectations(spectrum, members=None) -> np.ndarray:
    """``<n_i>/N`` for each eigenstate; shape ``(k, 3)``."""
    V = spectrum.eigenvectors if members is None else spectrum.eigenvectors[:, members]
    return (V**2).T @ spectrum.basis.occupations / spectrum.params.N


def site2_expectation(spectrum, nu: int) -> float:
    X = spectrum.vector(nu) ** 2
    return float(X @ spectrum.basis.n2) / spectrum.params.N


def haar_mean_overlap(spectrum, nu: int, npts: int = 24) -> float:
    """``dim * <Q_nu>`` over the uniform (Fubini-Study) measure, by tensor quadrature.

    Equals 1 by the coherent-state resolution of identity.
    """
    # simplex (p1, p2): Gauss-Legendre in p1 and in s = p2/(1 - p1)
    x, w = np.polynomial.legendre.leggauss(npts)
    t, wt = 0.5 * (x + 1), 0.5 * w
    ang = 2 * np.pi * np.arange(npts) / npts
    basis = spectrum.basis
    vec = spectrum.vector(nu)
    total = 0.0
    for p1, w1 in zip(t, wt):
        for s, w2 in zip(t, wt):
            p2 = s * (1 - p1)
            jac = 1 - p1
            for q1 in ang:
                for q2 in ang:
                    amp = fock_amplitudes(
                        [math.sqrt(p1) * np.exp(1j * q1), math.sqrt(p2) * np.exp(1j * q2), math.sqrt(max(0.0, 1 - p1 - p2))],
                        basis,
                    )
                    total += w1 * w2 * jac * abs(np.dot(np.conj(amp), vec)) ** 2
    mean = total / (npts * npts) / 0.5  # simplex area is 1/2
    return spectrum.size * mean


def section_q1(params, h: float, q2: float, p1: float, p2: float, near: float = math.pi) -> float | None:
    """Angle ``q1`` on the energy surface ``h`` nearest ``near``, or None if none exists."""
    p3 = 1.0 - p1 - p2
    if p3 < 0:
        return None
    rest = (
        params.v * p2
        + 0.5 * params.u * (p1 * p1 + p2 * p2 + p3 * p3)
        - math.sqrt(p2 * p3) * math.cos(q2)
    ) * params.omega
    b = -params.omega * math.sqrt(p1 * p2)
    if b == 0:
        return math.pi if abs(h - rest) < 1e-12 else None
    c = (h - rest) / b
    if abs(c) > 1:
        return None
    d = math.acos(c)
    cands = [q2 + d, q2 - d]
    return min(cands, key=lambda q: abs(math.remainder(q - near, 2 * math.pi)))


@dataclass
class HusimiGrid:
    nu: int
    energy: float
    q2: np.ndarray
    p2: np.ndarray
    q1_used: np.ndarray
    on_shell: np.ndarray
    Q: np.ndarray
    mode: str = "raw"

    def rows(self):
        for k in np.ndindex(self.Q.shape):
            yield float(self.q2[k]), float(self.p2[k]), float(self.q1_used[k]), float(self.Q[k])

    def metadata(self) -> dict:
        return {"nu": self.nu, "E_nu": self.energy, "normalization": self.mode}


def husimi_grid(spectrum, nu: int, q2_values, p2_values, p1: float = 0.5, mode: str = "raw") -> HusimiGrid:
    """Husimi function on the ``p1`` section plane, energy-constrained in ``q1``.

    ``mode="max"`` rescales by the maximum over the grid.
    """
    if mode not in ("raw", "max"):
        raise InvalidArgument("mode must be 'raw' or 'max'")
    params = spectrum.params
    E = float(spectrum.energies[nu])
    h = E / params.N
    q2g, p2g = np.meshgrid(np.asarray(q2_values, float), np.asarray(p2_values, float), indexing="ij")
    Q = np.full(q2g.shape, np.nan)
    q1g = np.full(q2g.shape, np.nan)
    on = np.zeros(q2g.shape, dtype=bool)
    vec = spectrum.vector(nu)
    for k in np.ndindex(q2g.shape):
        q2, p2 = q2g[k], p2g[k]
        if p1 + p2 > 1:
            continue
        q1 = section_q1(params, h, q2, p1, p2)
        on[k] = q1 is not None
        q1 = math.pi if q1 is None else q1
        amp = fock_amplitudes(phasepoint_to_spinor(PhasePoint(q1, q2, p1, p2)).spinor, spectrum.basis)
        Q[k] = abs(np.dot(np.conj(amp), vec)) ** 2
        q1g[k] = q1
    if mode == "max":
        Q = Q / np.nanmax(Q)
    return HusimiGrid(int(nu), E, q2g, p2g, q1g, on, Q, mode)
