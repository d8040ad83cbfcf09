import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from irrevdyn.algebra import (
    LocalOperator,
    Volume,
    anticommutator,
    commutator,
    embed,
    minimal_support,
    op_norm,
    pauli,
    pauli_string,
    weyl_basis,
)
from irrevdyn.lattice import chain, grid

from oracles import SX, SY, SZ, kron_all, site_op

complex_entries = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


def mats(d):
    return arrays(np.complex128, (d, d), elements=complex_entries)


def test_volume_dimensions_and_cap():
    V = Volume(chain(3))
    assert V.total_dim == 8 and V.n_sites == 3 and V.dim_of((0, 2)) == 4
    W = Volume(chain(2), site_dims=(2, 3))
    assert W.total_dim == 6
    with pytest.raises(ValueError, match="cap"):
        Volume(chain(9), cap=256)
    with pytest.raises(ValueError, match="absolute"):
        Volume(chain(2), cap=10_000)
    assert Volume(chain(12)).total_dim == 4096


def test_embed_identity_and_site_order():
    V = Volume(chain(2))
    assert np.array_equal(embed(LocalOperator((0,), np.eye(2)), V), np.eye(4))
    assert np.array_equal(embed(LocalOperator.pauli(0, "Z"), V), np.diag([1, 1, -1, -1]).astype(complex))
    assert np.array_equal(embed(LocalOperator.pauli(1, "Z"), V), np.diag([1, -1, 1, -1]).astype(complex))


def test_embed_reorders_listed_support():
    V = Volume(chain(3))
    A = LocalOperator((2, 0), np.kron(SX, SZ))
    assert np.allclose(embed(A, V), site_op(SZ, 0, 3) @ site_op(SX, 2, 3))


def test_embed_grid_sites():
    V = Volume(grid(2, 2))
    A = LocalOperator.pauli((1, 0), "Y")
    assert np.allclose(embed(A, V), kron_all([np.eye(2), np.eye(2), SY, np.eye(2)]))


def test_embed_errors():
    V = Volume(chain(2))
    with pytest.raises(ValueError, match="not in the volume"):
        embed(LocalOperator.pauli(5, "X"), V)
    with pytest.raises(ValueError, match="dimension"):
        embed(LocalOperator((0,), np.eye(3)), V)
    with pytest.raises(ValueError, match="square"):
        LocalOperator((0,), np.ones((2, 3)))


@given(mats(2), mats(2))
def test_embed_is_multiplicative(A, B):
    V = Volume(chain(3))
    lhs = embed(LocalOperator((1,), A @ B), V)
    rhs = embed(LocalOperator((1,), A), V) @ embed(LocalOperator((1,), B), V)
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(lhs).max()))


@given(mats(2), mats(2))
def test_disjoint_supports_commute_exactly(A, B):
    V = Volume(chain(3))
    a = embed(LocalOperator((0,), A), V)
    b = embed(LocalOperator((2,), B), V)
    assert np.array_equal(commutator(a, b), np.zeros_like(a))


def test_op_norm_examples():
    assert op_norm(np.eye(3)) == 1.0
    assert op_norm(np.kron(SX, SX)) == pytest.approx(1.0, abs=1e-15)
    assert op_norm(np.diag([3, -4j])) == pytest.approx(4.0, abs=1e-15)
    assert op_norm(np.zeros((0, 0))) == 0.0


@given(mats(3))
def test_op_norm_matches_singular_values(M):
    assert op_norm(M) == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-10, abs=1e-12)


def test_commutator_examples():
    assert np.allclose(commutator(SX, SY), 2j * SZ)
    assert np.array_equal(commutator(SX, np.eye(2)), np.zeros((2, 2)))
    assert np.allclose(anticommutator(SX, SY), 0)
    assert np.allclose(anticommutator(SZ, SZ), 2 * np.eye(2))
    with pytest.raises(ValueError, match="mismatch"):
        commutator(np.eye(2), np.eye(4))


def test_pauli_helpers():
    assert np.array_equal(pauli_string("XZ"), np.kron(SX, SZ))
    assert np.array_equal(pauli("-"), np.array([[0, 0], [1, 0]]))
    p = pauli("x")
    p[0, 0] = 7
    assert pauli("X")[0, 0] == 0


def test_weyl_basis_is_orthogonal():
    for d in (2, 3):
        B = weyl_basis(d)
        G = np.array([[np.trace(a.conj().T @ b) for b in B] for a in B])
        assert np.allclose(G, d * np.eye(d * d))


def test_minimal_support_examples():
    V = Volume(chain(4))
    assert minimal_support(embed(LocalOperator.pauli(1, "Z"), V), V) == (1,)
    assert minimal_support(V.identity(), V) == ()


@given(mats(4))
def test_minimal_support_round_trip(M):
    V = Volume(chain(4))
    # strip identity components so the operator genuinely acts on both sites
    M = M - np.kron(np.trace(M.reshape(2, 2, 2, 2), axis1=1, axis2=3) / 2, np.eye(2))
    M = M - np.kron(np.eye(2), np.trace(M.reshape(2, 2, 2, 2), axis1=0, axis2=2) / 2)
    if op_norm(M) < 1e-3:
        return
    full = embed(LocalOperator((0, 2), M), V)
    assert minimal_support(full, V) == (0, 2)


def test_minimal_support_qutrit_volume():
    V = Volume(chain(2), site_dims=(3, 2))
    X3 = np.roll(np.eye(3), 1, axis=0)
    full = embed(LocalOperator((0,), X3 + X3.T), V)
    assert minimal_support(full, V) == (0,)
