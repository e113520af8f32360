import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhtrimer.errors import InvalidArgument
from bhtrimer.fock import (
    ModelParams,
    assemble,
    build_basis,
    build_hamiltonian,
    build_sparse_hamiltonian,
    dimension,
)

from .oracles import ladder_hamiltonian, lex_states


@pytest.mark.parametrize("N,expected", [(1, 3), (2, 6), (150, 11476)])
def test_dimension(N, expected):
    assert dimension(N) == expected


@pytest.mark.parametrize("N", [0, -1, 2.5])
def test_dimension_rejects_bad_N(N):
    with pytest.raises(InvalidArgument):
        dimension(N)


def test_params_validation():
    with pytest.raises(InvalidArgument):
        ModelParams(0, 1.0, 0.0)
    with pytest.raises(InvalidArgument):
        ModelParams(3, 1.0, 0.0, omega=0.0)
    with pytest.raises(InvalidArgument):
        ModelParams(3, float("nan"), 0.0)
    p = ModelParams(10, 3.0, 0.1, omega=2.0)
    assert p.U == pytest.approx(0.6) and p.V == pytest.approx(0.2)


def test_basis_order_small():
    b = build_basis(1)
    assert [tuple(s) for s in b.states] == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    assert [tuple(s) for s in build_basis(3).states] == lex_states(3)


def test_basis_last_state_large():
    b = build_basis(150)
    assert b.state(b.size - 1) == (150, 0, 0)


@given(st.integers(1, 60), st.data())
def test_index_roundtrip(N, data):
    b = build_basis(N)
    idx = data.draw(st.integers(0, b.size - 1))
    assert b.index(b.state(idx)) == idx
    s = b.state(idx)
    assert s.N == N and min(s) >= 0


def test_index_errors():
    b = build_basis(4)
    with pytest.raises(InvalidArgument):
        b.index((3, 3, -2))
    with pytest.raises(InvalidArgument):
        b.index((1, 1, 1))
    with pytest.raises(IndexError):
        b.state(b.size)


def test_n1_single_particle_matrix():
    H = build_hamiltonian(build_basis(1), ModelParams(1, 0.0, 0.0)).matrix
    # basis order: site 3, site 2, site 1
    expected = -0.5 * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert np.array_equal(H, expected)
    assert np.allclose(np.linalg.eigvalsh(H), [-1 / np.sqrt(2), 0, 1 / np.sqrt(2)], atol=1e-15)


@given(st.floats(-5, 5), st.floats(-2, 2))
def test_n1_diagonal(u, v):
    H = build_hamiltonian(build_basis(1), ModelParams(1, u, v)).matrix
    b = build_basis(1)
    diag = {tuple(s): H[i, i] for i, s in enumerate(b.states)}
    assert diag[(1, 0, 0)] == pytest.approx(u / 2)
    assert diag[(0, 1, 0)] == pytest.approx(v + u / 2)
    assert diag[(0, 0, 1)] == pytest.approx(u / 2)


@pytest.mark.parametrize("N", range(1, 9))
def test_matches_ladder_operator_oracle(N):
    for u, v, om in ((3.0, 0.1, 1.0), (0.7, -0.4, 1.3)):
        H = build_hamiltonian(build_basis(N), ModelParams(N, u, v, om)).matrix
        assert np.max(np.abs(H - ladder_hamiltonian(N, u, v, om))) <= 1e-12


@given(st.integers(1, 25), st.floats(-4, 4), st.floats(-1, 1))
def test_symmetry_and_mirror(N, u, v):
    b = build_basis(N)
    H = build_hamiltonian(b, ModelParams(N, u, v)).matrix
    assert np.array_equal(H, H.T)
    perm = b.mirror_permutation()
    assert np.array_equal(H[np.ix_(perm, perm)], H)
    assert sorted(perm) == list(range(b.size))
    assert np.all((H != 0).sum(axis=1) <= 5)


@given(st.integers(1, 25), st.floats(-4, 4), st.floats(-1, 1))
def test_trace(N, u, v):
    b = build_basis(N)
    p = ModelParams(N, u, v)
    H = build_hamiltonian(b, p).matrix
    expected = sum(p.V * n2 + 0.5 * p.U * (n1 * n1 + n2 * n2 + n3 * n3) for n1, n2, n3 in b.states)
    assert np.trace(H) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_sparse_and_sink_agree_with_dense():
    b = build_basis(9)
    p = ModelParams(9, 2.0, 0.3)
    H = build_hamiltonian(b, p).matrix
    assert np.array_equal(build_sparse_hamiltonian(b, p).toarray(), H)
    M = np.zeros_like(H)

    def put(i, j, x):
        M[i, j] = x

    assemble(b, p, put)
    assert np.array_equal(M, H)


def test_mismatched_basis():
    with pytest.raises(InvalidArgument):
        build_hamiltonian(build_basis(3), ModelParams(4, 1.0, 0.0))


def test_hop_pairs_amplitudes():
    b = build_basis(4)
    i, j, amp = b.hop_pairs(0, 1)
    for a, c, x in zip(i, j, amp):
        n = b.state(a)
        m = b.state(c)
        assert m == (n[0] - 1, n[1] + 1, n[2])
        assert x == pytest.approx(np.sqrt(n[0] * (n[1] + 1)))
