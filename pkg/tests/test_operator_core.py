import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from cqlbench import operator_core as oc


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1), scale=st.floats(-5, 5))
def test_herm_expm_matches_scipy(n, seed, scale):
    h = random_hermitian(np.random.default_rng(seed), n)
    u = oc.herm_expm(h, scale)
    assert_allclose(u, scipy.linalg.expm(-1j * scale * h), atol=1e-10)
    assert oc.is_unitary(u)


def test_herm_expm_rejects_non_hermitian():
    with pytest.raises(oc.ContractError):
        oc.herm_expm(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)


def test_tensor_matches_kron():
    a = np.arange(4.0).reshape(2, 2)
    b = np.eye(3)
    assert_allclose(oc.tensor(a, b, a), np.kron(np.kron(a, b), a))


def test_operator_cap():
    with pytest.raises(oc.CapacityError) as err:
        oc.check_operator_dim(oc.MAX_OPERATOR_DIM + 1)
    assert err.value.dim == oc.MAX_OPERATOR_DIM + 1


def test_state_cap_env_override(monkeypatch):
    monkeypatch.setenv("CQLBENCH_MAX_DIM", "10")
    with pytest.raises(oc.CapacityError):
        oc.check_state_dim(11)
    oc.check_state_dim(10)


def test_pauli_algebra():
    sx, sy, sz = oc.sigma_x(), oc.sigma_y(), oc.sigma_z()
    assert_allclose(sx @ sy, 1j * sz)
    assert_allclose(sz, np.diag([1, -1]))
    # embedded on the ground doublet of a three-level atom
    assert_allclose(oc.sigma_z(3), np.diag([1, -1, 0]))


def test_expectation_and_variance():
    sz = oc.sigma_z()
    assert oc.expectation(sz, oc.PLUS_Y) == pytest.approx(0.0)
    assert oc.variance(sz, oc.PLUS_Y) == pytest.approx(1.0)
    assert oc.variance(sz, oc.ket(0, 2)) == 0.0


def test_expectation_checks_normalization():
    with pytest.raises(oc.ContractError):
        oc.expectation(oc.sigma_z(), np.array([1.0, 1.0]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_variance_non_negative(seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, 5)
    psi = rng.normal(size=5) + 1j * rng.normal(size=5)
    psi /= np.linalg.norm(psi)
    assert oc.variance(h, psi) >= 0.0


def test_commutator_norm():
    assert oc.commutator_norm(oc.sigma_x(), oc.sigma_y()) == pytest.approx(2.0)
    assert oc.commutator_norm(oc.sigma_z(), oc.sigma_z()) == 0.0
