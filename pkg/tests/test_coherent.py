import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhtrimer.coherent import (
    SP_SPINOR,
    CoherentState,
    PhasePoint,
    fock_amplitudes,
    fock_overlap,
    haar_mean_overlap,
    husimi,
    husimi_grid,
    one_particle_density,
    one_particle_density_vector,
    phasepoint_to_spinor,
    purity,
    section_q1,
    site2_expectation,
    site_expectations,
    sp_overlap_all,
    sp_state,
    spinor_to_phasepoint,
)
from bhtrimer.classical.hamiltonian import hcl
from bhtrimer.errors import InvalidArgument
from bhtrimer.fock import ModelParams, build_basis
from bhtrimer.spectral import compute_spectrum

angles = st.floats(-math.pi, math.pi)


@st.composite
def points(draw):
    p1 = draw(st.floats(0, 1))
    p2 = draw(st.floats(0, 1 - p1))
    return PhasePoint(draw(angles), draw(angles), p1, p2)


@st.composite
def spinors(draw):
    re = [draw(st.floats(-1, 1)) for _ in range(3)]
    im = [draw(st.floats(-1, 1)) for _ in range(3)]
    z = np.array(re) + 1j * np.array(im)
    n = np.linalg.norm(z)
    if n < 1e-3:
        z, n = np.array([1, 0, 0], complex), 1.0
    return z / n


def test_phasepoint_examples():
    s = phasepoint_to_spinor(PhasePoint(math.pi, 1.234, 0.5, 0.0)).spinor
    assert np.allclose(s, [-1 / math.sqrt(2), 0, 1 / math.sqrt(2)], atol=1e-15)
    assert np.allclose(s, -SP_SPINOR, atol=1e-15)
    assert np.allclose(phasepoint_to_spinor(PhasePoint(0, 0, 1, 0)).spinor, [1, 0, 0])
    a = phasepoint_to_spinor(PhasePoint(0.3, 0.1, 0.2, 0.0)).spinor
    b = phasepoint_to_spinor(PhasePoint(0.3, 2.9, 0.2, 0.0)).spinor
    assert np.allclose(a, b)
    with pytest.raises(InvalidArgument):
        PhasePoint(0, 0, 0.7, 0.6)
    with pytest.raises(InvalidArgument):
        CoherentState(np.array([1.0, 1.0, 0.0]), 3)


@given(points())
def test_phasepoint_roundtrip(pt):
    z = phasepoint_to_spinor(pt).spinor
    assert np.linalg.norm(z) == pytest.approx(1.0)
    assert z[2].imag == 0 and z[2].real >= 0
    back = spinor_to_phasepoint(z)
    assert back.p1 == pytest.approx(pt.p1, abs=1e-12) and back.p2 == pytest.approx(pt.p2, abs=1e-12)
    w = phasepoint_to_spinor(back).spinor
    assert abs(np.vdot(z, w)) == pytest.approx(1.0, abs=1e-10)


@given(spinors(), st.integers(1, 40))
def test_amplitudes_normalized(z, N):
    amp = fock_amplitudes(z, build_basis(N))
    assert np.sum(np.abs(amp) ** 2) == pytest.approx(1.0, rel=1e-10)


@given(spinors(), st.integers(1, 12), st.data())
def test_fock_overlap_matches_vector(z, N, data):
    b = build_basis(N)
    k = data.draw(st.integers(0, b.size - 1))
    st_ = CoherentState(z, N)
    assert fock_overlap(st_, b.state(k)) == pytest.approx(st_.amplitudes(b)[k], abs=1e-12)
    n1, n2, n3 = b.state(k)
    direct = math.sqrt(math.factorial(N) / (math.factorial(n1) * math.factorial(n2) * math.factorial(n3)))
    direct *= z[0] ** n1 * z[1] ** n2 * z[2] ** n3
    assert fock_overlap(st_, b.state(k)) == pytest.approx(direct, abs=1e-12)


def test_fock_overlap_examples():
    assert fock_overlap(CoherentState(np.array([1, 0, 0]), 7), (7, 0, 0)) == 1.0
    sp = sp_state(150)
    for k in (0, 30, 75, 150):
        assert abs(fock_overlap(sp, (k, 0, 150 - k))) ** 2 == pytest.approx(math.comb(150, k) / 2**150, rel=1e-10)
    assert fock_overlap(sp, (3, 1, 146)) == 0
    with pytest.raises(InvalidArgument):
        fock_overlap(sp, (1, 1, 1))


def test_sp_eigenstate_at_u0():
    # v breaks the accidental E=0 degeneracy of the free trimer
    s = compute_spectrum(ModelParams(10, 0.0, 0.1))
    nu, Q = sp_overlap_all(s)
    assert Q[nu] == pytest.approx(1.0, abs=1e-10)
    assert s.energies[nu] == pytest.approx(0.0, abs=1e-12)
    site2 = CoherentState(np.array([0, 1, 0]), 10)
    assert husimi(s, nu, site2) == pytest.approx(0.0, abs=1e-20)
    assert np.sum(Q) == pytest.approx(1.0)


def test_sp_state_in_degenerate_subspace():
    s = compute_spectrum(ModelParams(6, 0.0, 0.0))
    _, Q = sp_overlap_all(s)
    zero = np.abs(s.energies) < 1e-9
    assert zero.sum() > 1
    assert Q[zero].sum() == pytest.approx(1.0, abs=1e-10)


@given(spinors(), st.floats(0, 2 * math.pi))
def test_gauge_invariance(z, phi):
    s = compute_spectrum(ModelParams(5, 2.0, 0.1))
    a = husimi(s, 4, CoherentState(z, 5))
    b = husimi(s, 4, CoherentState(z * np.exp(1j * phi), 5))
    assert a == pytest.approx(b, abs=1e-12)
    r1 = one_particle_density_vector(CoherentState(z, 5).amplitudes(s.basis), s.basis)
    r2 = one_particle_density_vector(CoherentState(z * np.exp(1j * phi), 5).amplitudes(s.basis), s.basis)
    assert np.allclose(r1, r2, atol=1e-12)


@given(points(), st.integers(0, 27))
def test_mirror_covariance(pt, nu):
    s = compute_spectrum(ModelParams(6, 2.0, 0.3))
    perm = s.basis.mirror_permutation()
    v = s.vector(nu)
    mirrored = np.empty_like(v)
    mirrored[perm] = v
    a = fock_amplitudes(phasepoint_to_spinor(pt).spinor, s.basis)
    b = fock_amplitudes(phasepoint_to_spinor(pt.mirrored()).spinor, s.basis)
    # on a simplex face the mirrored p3 carries rounding of order eps, i.e. sqrt(eps) in amplitude
    assert abs(np.vdot(a, v)) ** 2 == pytest.approx(abs(np.vdot(b, mirrored)) ** 2, abs=1e-7)


@given(spinors(), st.integers(1, 15))
def test_coherent_density_is_pure(z, N):
    b = build_basis(N)
    rho = one_particle_density_vector(fock_amplitudes(z, b), b)
    assert np.allclose(rho, np.outer(np.conj(z), z), atol=1e-12)
    assert purity(rho) == pytest.approx(1.0)


def test_purity_bounds(small_spectrum):
    assert purity(np.eye(3) / 3) == pytest.approx(1 / 3)
    for nu in range(0, small_spectrum.size, 7):
        rho = one_particle_density(small_spectrum, nu)
        assert np.allclose(rho, np.conj(rho).T)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
        assert np.linalg.eigvalsh(rho).min() >= -1e-12
        assert 1 / 3 - 1e-12 <= purity(rho) <= 1 + 1e-12


def test_site_expectations(small_spectrum):
    occ = site_expectations(small_spectrum)
    assert np.allclose(occ.sum(axis=1), 1.0)
    assert site2_expectation(small_spectrum, 3) == pytest.approx(occ[3, 1])
    s = compute_spectrum(ModelParams(1, 0.0, 0.0))
    assert site2_expectation(s, 0) == pytest.approx(0.5)
    dark = compute_spectrum(ModelParams(6, 0.0, 0.1))
    nu, _ = sp_overlap_all(dark)
    assert site2_expectation(dark, nu) == pytest.approx(0.0, abs=1e-12)


def test_resolution_of_identity():
    s = compute_spectrum(ModelParams(4, 1.0, 0.1))
    for nu in (0, 7, 14):
        assert haar_mean_overlap(s, nu, npts=14) == pytest.approx(1.0, rel=1e-6)


def test_section_q1_on_shell():
    p = ModelParams(20, 3.0, 0.1)
    h = 0.5
    q1 = section_q1(p, h, 0.4, 0.5, 0.2)
    assert q1 is not None
    assert hcl(PhasePoint(q1, 0.4, 0.5, 0.2), p) == pytest.approx(h, abs=1e-12)
    assert section_q1(p, 100.0, 0.4, 0.5, 0.2) is None


def test_husimi_grid(small_spectrum):
    g = husimi_grid(small_spectrum, 40, np.linspace(-math.pi, math.pi, 6), np.linspace(0, 0.5, 5))
    assert g.Q.shape == (6, 5) and np.all((g.Q >= 0) & (g.Q <= 1))
    assert g.metadata()["normalization"] == "raw"
    m = husimi_grid(small_spectrum, 40, np.linspace(-math.pi, math.pi, 6), np.linspace(0, 0.5, 5), mode="max")
    assert np.nanmax(m.Q) == pytest.approx(1.0)
    assert len(list(g.rows())) == 30
    with pytest.raises(InvalidArgument):
        husimi_grid(small_spectrum, 40, [0.0], [0.1], mode="bad")
