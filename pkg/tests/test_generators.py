import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qudit_tomo.errors import DimensionTooLarge, IndexOutOfRange, InvalidPair
from qudit_tomo.generators import beta, elementary, eta, lambda_basis, slot_map, tensor_basis, theta

X = np.array([[0, 1], [1, 0]])
Y = np.array([[0, -1j], [1j, 0]])
Z = np.array([[1, 0], [0, -1]])

# SU(3) generators as printed, in order lambda_1 .. lambda_8
GELLMANN3 = [
    [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
    [[0, -1j, 0], [1j, 0, 0], [0, 0, 0]],
    [[1, 0, 0], [0, -1, 0], [0, 0, 0]],
    [[0, 0, 1], [0, 0, 0], [1, 0, 0]],
    [[0, 0, -1j], [0, 0, 0], [1j, 0, 0]],
    [[0, 0, 0], [0, 0, 1], [0, 1, 0]],
    [[0, 0, 0], [0, 0, -1j], [0, 1j, 0]],
    list(np.diag([1, 1, -2]) / np.sqrt(3)),
]


def test_elementary():
    np.testing.assert_array_equal(elementary(2, 1, 2), [[0, 1], [0, 0]])
    e = elementary(3, 3, 3)
    assert e[2, 2] == 1 and np.count_nonzero(e) == 1
    with pytest.raises(IndexOutOfRange):
        elementary(3, 0, 1)
    with pytest.raises(IndexOutOfRange):
        elementary(3, 1, 4)


def test_commutator_qubit():
    e12, e21 = elementary(2, 1, 2), elementary(2, 2, 1)
    np.testing.assert_array_equal(e12 @ e21 - e21 @ e12, elementary(2, 1, 1) - elementary(2, 2, 2))


@given(st.integers(2, 5).flatmap(lambda d: st.tuples(st.just(d), *[st.integers(1, d)] * 4)))
def test_commutator_identity(args):
    d, i, j, k, l = args
    lhs = elementary(d, i, j) @ elementary(d, k, l) - elementary(d, k, l) @ elementary(d, i, j)
    rhs = (k == j) * elementary(d, i, l) - (i == l) * elementary(d, k, j)
    np.testing.assert_array_equal(lhs, rhs)


def test_off_diagonal_generators():
    np.testing.assert_array_equal(theta(2, 1, 2), X)
    np.testing.assert_array_equal(beta(2, 1, 2), Y)
    np.testing.assert_array_equal(theta(3, 2, 3), GELLMANN3[5])
    with pytest.raises(InvalidPair):
        theta(3, 2, 2)
    with pytest.raises(InvalidPair):
        beta(3, 3, 1)
    with pytest.raises(IndexOutOfRange):
        theta(3, 1, 4)


def test_eta():
    np.testing.assert_array_equal(eta(2, 1), Z)
    np.testing.assert_allclose(eta(3, 2), np.diag([1, 1, -2]) / np.sqrt(3), atol=0)
    e = eta(4, 3)
    # sqrt(2/(3*4)) * diag(1, 1, 1, -3)
    np.testing.assert_allclose(np.diag(e).real, np.sqrt(1 / 6) * np.array([1, 1, 1, -3]), atol=1e-15)
    assert abs(np.trace(e)) < 1e-15
    assert np.isclose(np.trace(e @ e).real, 2.0)
    with pytest.raises(IndexOutOfRange):
        eta(3, 3)


def test_lambda_basis_qubit_exact():
    b = lambda_basis(2)
    for got, want in zip(b.operators, [np.eye(2), X, Y, Z]):
        np.testing.assert_array_equal(got, want)


def test_lambda_basis_qutrit_exact():
    b = lambda_basis(3)
    np.testing.assert_array_equal(b[0], np.eye(3))
    for j, want in enumerate(GELLMANN3, start=1):
        np.testing.assert_array_equal(b[j], np.array(want, dtype=complex))


@pytest.mark.parametrize("d", range(2, 7))
def test_slot_map_is_bijection(d):
    expected = {}
    for j in range(2, d + 1):
        for k in range(1, j):
            expected[(j - 1) ** 2 + 2 * (k - 1)] = ("theta", k, j)
            expected[(j - 1) ** 2 + 2 * k - 1] = ("beta", k, j)
        expected[j * j - 1] = ("eta", j - 1, j - 1)
    assert sorted(expected) == list(range(1, d * d))
    assert slot_map(d) == expected
    kinds = [v[0] for v in expected.values()]
    assert kinds.count("eta") == d - 1
    assert len(kinds) - kinds.count("eta") == d * (d - 1)


@pytest.mark.parametrize("d", range(2, 7))
def test_generator_algebra(d):
    ops = lambda_basis(d).operators
    assert ops.shape == (d * d, d, d)
    gens = ops[1:]
    for g in gens:
        assert abs(np.trace(g)) < 1e-12
        np.testing.assert_allclose(g, g.conj().T, atol=0)
    gram = np.einsum("iab,jba->ij", gens, gens)
    np.testing.assert_allclose(gram, 2 * np.eye(d * d - 1), atol=1e-12)
    full_gram = np.einsum("iab,jab->ij", ops.conj(), ops)
    assert np.linalg.matrix_rank(full_gram) == d * d


def test_tensor_basis_ordering():
    single = lambda_basis(2)
    b = tensor_basis(2, 1)
    np.testing.assert_array_equal(b.operators, single.operators)
    b2 = tensor_basis(2, 2)
    assert len(b2) == 16
    np.testing.assert_array_equal(b2[0], np.eye(4))
    np.testing.assert_array_equal(b2[15], np.kron(Z, Z))
    for idx, (j1, j2) in enumerate(itertools.product(range(4), repeat=2)):
        np.testing.assert_array_equal(b2[idx], np.kron(single[j1], single[j2]))
        assert b2.multi_index(idx) == (j1, j2)


def test_tensor_basis_two_qutrits_gram():
    b = tensor_basis(3, 2)
    assert len(b) == 81 and b[0].shape == (9, 9)
    gram = np.einsum("iab,jab->ij", b.operators.conj(), b.operators)
    np.testing.assert_allclose(gram, np.diag(b.norms), atol=1e-12)
    # identity slot norm is d**n, a pure generator pair is 2*2
    assert b.norms[0] == 9 and b.norms[10] == 4 and b.norms[1] == 6
    assert np.linalg.matrix_rank(gram) == 81


def test_tensor_basis_cap():
    with pytest.raises(DimensionTooLarge):
        tensor_basis(2, 6)
    assert len(tensor_basis(2, 6, max_dim=64)) == 4096


def test_basis_is_immutable():
    b = lambda_basis(3)
    with pytest.raises(ValueError):
        b.operators[0, 0, 0] = 5
