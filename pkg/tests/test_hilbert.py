import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from weakseq import hilbert
from weakseq.errors import ConfigurationError, ContractError

IX, IY, IZ = hilbert.spin_half_ops()
I2 = np.eye(2)

finite = st.floats(-3, 3, allow_nan=False)


def herm_matrix(dim):
    return arrays(float, (2, dim, dim), elements=finite).map(
        lambda a: (a[0] + 1j * a[1]) + (a[0] + 1j * a[1]).conj().T)


def test_spin_algebra():
    np.testing.assert_allclose(hilbert.commutator(IX, IY), 1j * IZ, atol=1e-15)
    assert abs(np.trace(IZ)) == 0
    np.testing.assert_allclose(IX @ IX + IY @ IY + IZ @ IZ, 0.75 * I2, atol=1e-15)
    np.testing.assert_allclose(hilbert.anticommutator(IX, IY), 0, atol=1e-15)


def test_kron_examples():
    np.testing.assert_array_equal(hilbert.kron(I2, I2), np.eye(4))
    np.testing.assert_array_equal(hilbert.kron(np.diag([1, -1]), I2), np.diag([1, 1, -1, -1]))


def test_kron_dimension_cap():
    hilbert.kron(*[I2] * 7)
    with pytest.raises(ConfigurationError):
        hilbert.kron(*[I2] * 8)


def test_embed_places_operator():
    op = hilbert.embed(IZ, 1, 3)
    np.testing.assert_array_equal(op, np.kron(np.kron(I2, IZ), I2))


def test_herm_expm_examples():
    np.testing.assert_allclose(hilbert.herm_expm(np.zeros((2, 2)), 1.7), I2, atol=1e-15)
    np.testing.assert_allclose(hilbert.herm_expm(IZ, -2 * np.pi), -I2, atol=1e-14)


def test_herm_expm_rejects_non_hermitian():
    with pytest.raises(ContractError):
        hilbert.herm_expm(np.array([[0, 1], [0, 0]]), 1.0)


def test_commutator_shape_mismatch():
    with pytest.raises(ContractError):
        hilbert.commutator(I2, np.eye(4))


@given(herm_matrix(2), herm_matrix(2))
def test_kron_trace_multiplicative(a, b):
    assert np.isclose(np.trace(hilbert.kron(a, b)), np.trace(a) * np.trace(b), atol=1e-9)


@settings(max_examples=50)
@given(herm_matrix(4), st.floats(-5, 5))
def test_herm_expm_unitary_and_inverse(h, s):
    u = hilbert.herm_expm(h, s)
    np.testing.assert_allclose(u @ hilbert.herm_expm(h, -s), np.eye(4), atol=1e-10)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-10)


@given(herm_matrix(2))
def test_commutator_with_self_vanishes(a):
    np.testing.assert_allclose(hilbert.commutator(a, a), 0, atol=1e-12)


def test_check_density():
    hilbert.check_density(np.eye(2) / 2)
    hilbert.check_density(np.stack([np.eye(2) / 2, np.diag([1.0, 0.0])]))
    assert not hilbert.is_density(np.eye(2))
    assert not hilbert.is_density(np.diag([1.5, -0.5]))
    assert not hilbert.is_density(np.array([[0.5, 1], [0, 0.5]]))
