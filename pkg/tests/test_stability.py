import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhtrimer.classical.hamiltonian import hcl_spinor
from bhtrimer.errors import InvalidArgument
from bhtrimer.fock import ModelParams
from bhtrimer.stability import (
    STABLE,
    UNSTABLE,
    MeanFieldState,
    bogoliubov_matrix,
    closed_form,
    closed_form_v0,
    find_thresholds,
    frequencies,
    numerical_frequencies,
    sp_state,
    stability_table,
    write_stability_csv,
    zero_mode,
)


def _nonzero_pairs(u, v):
    ev = numerical_frequencies(u, v)
    ev = ev[np.argsort(np.abs(ev))][2:]  # drop the defective zero pair
    return ev


@given(st.floats(0, 5), st.floats(-1, 1))
def test_sp_state(u, v):
    p = ModelParams(10, u, v)
    s = sp_state(p)
    assert np.allclose(s.spinor, [1 / math.sqrt(2), 0, -1 / math.sqrt(2)])
    assert s.mu == pytest.approx(u / 2)
    assert hcl_spinor(s.spinor, p) == pytest.approx(u / 4)


def test_bogoliubov_structure():
    p = ModelParams(1, 0.0, 0.3)
    M = bogoliubov_matrix(sp_state(p), p)
    L = M[:3, :3]
    assert np.allclose(M[3:, 3:], -L) and np.allclose(M[:3, 3:], 0) and np.allclose(M[3:, :3], 0)
    # linear limit: +- one-particle gaps above mu = 0
    gaps = np.sort(np.abs(np.linalg.eigvals(M).real))
    r = math.sqrt(0.09 + 2)
    assert np.allclose(gaps, np.sort([0, 0, *[abs(0.5 * (0.3 - r))] * 2, *[0.5 * (0.3 + r)] * 2]))
    with pytest.raises(InvalidArgument):
        bogoliubov_matrix(MeanFieldState(np.array([1, 0, 0], complex), 0.0), ModelParams(1, 1.0, 0.1))


@given(st.floats(0, 4), st.floats(0, 0.2))
def test_spectrum_symmetric_under_negation(u, v):
    ev = numerical_frequencies(u, v)
    assert np.allclose(np.sort_complex(ev), np.sort_complex(-ev), atol=1e-6)


def test_closed_forms_match_numerics_on_grid():
    worst = 0.0
    for u in np.linspace(0, 4, 100):
        for v in np.linspace(0, 0.2, 20):
            wp, wm = closed_form(u, v)
            ev = _nonzero_pairs(u, v)
            reps = {complex(round(abs(w.real), 12), round(abs(w.imag), 12)) for w in ev}
            for w in (wp, wm):
                worst = max(worst, min(abs(w - r) for r in reps))
    assert worst <= 1e-10


def test_zero_mode_on_grid():
    worst = 0.0
    for u in np.linspace(0, 4, 100):
        for v in np.linspace(0, 0.2, 20):
            worst = max(worst, abs(frequencies(u, v).omega0))
    assert worst <= 1e-10


def test_zero_mode_kernel():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert zero_mode(A) == 0


@given(st.floats(0, 6))
def test_v0_formulas_agree(u):
    a = closed_form(u, 0.0)
    b = closed_form_v0(u)
    assert abs(a[0] - b[0]) <= 1e-12 * max(1, abs(b[0])) or abs(a[0] - b[1]) <= 1e-12 * max(1, abs(b[1]))
    assert {round(abs(x), 9) for x in a} == {round(abs(x), 9) for x in b}


def test_frequency_examples():
    r = frequencies(0.0, 0.0)
    assert r.omega_plus == pytest.approx(1 / math.sqrt(2)) and r.omega_minus == pytest.approx(1 / math.sqrt(2))
    assert r.verdict == STABLE
    assert frequencies(1.0, 0.1).verdict == UNSTABLE
    assert frequencies(0.1, 0.1).verdict == STABLE
    assert frequencies(3.5, 0.1).verdict == STABLE
    assert frequencies(2.9, 0.0).verdict == STABLE and frequencies(2.8, 0.0).verdict == UNSTABLE


def test_thresholds():
    lo, hi = find_thresholds(0.1)
    assert lo == pytest.approx(0.2, abs=1e-6)
    assert hi == pytest.approx(3.2, abs=0.02)
    lo, hi = find_thresholds(0.0)
    assert lo == pytest.approx(0.0, abs=1e-6) and hi == pytest.approx(math.sqrt(8), abs=1e-6)
    assert find_thresholds(0.05)[0] == pytest.approx(0.1, abs=1e-6)
    with pytest.raises(InvalidArgument):
        find_thresholds(0.1, u_range=(3.5, 6.0))
    with pytest.raises(InvalidArgument):
        find_thresholds(0.1, u_range=(0.0, 1.0))


def test_table_and_csv(tmp_path):
    reps = stability_table([0.1, 1.0], [0.0, 0.1])
    assert len(reps) == 4
    path = tmp_path / "s.csv"
    write_stability_csv(path, reps)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("u,v,re_omega_plus") and len(lines) == 5
