import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from riplab.exceptions import DimensionMismatch, ValidationError
from riplab.linalg import (
    FactorPair,
    build_error_jacobian,
    commutation_matrix,
    kron,
    materialize,
    positive_part,
    pseudoinverse,
    psd_project,
    residual_projector,
    symmetric_basis,
    vectorize,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_vectorize_identity():
    np.testing.assert_array_equal(vectorize(np.eye(2)), [1, 0, 0, 1])
    np.testing.assert_array_equal(materialize([1, 0, 0, 1], 2, 2), np.eye(2))


def test_vectorize_is_column_stacking():
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    M = np.array([[a, b], [c, d]])
    np.testing.assert_array_equal(vectorize(M), [a, c, b, d])


def test_materialize_rejects_bad_size():
    with pytest.raises(DimensionMismatch):
        materialize(np.ones(5), 2, 2)


@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=finite))
def test_vec_roundtrip_exact(M):
    np.testing.assert_array_equal(materialize(vectorize(M), *M.shape), M)


def test_kron_identity_and_diag():
    np.testing.assert_array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    np.testing.assert_array_equal(kron(np.diag([1, 2]), np.diag([3, 4])), np.diag([3, 4, 6, 8]))


def test_kron_vec_identity():
    rng = np.random.default_rng(0)
    for _ in range(10):
        A, B, X = rng.standard_normal((3, 3, 3))
        lhs = vectorize(A @ X @ B.T)
        np.testing.assert_allclose(lhs, kron(B, A) @ vectorize(X), atol=1e-12)


def test_commutation_matrix():
    Y = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(commutation_matrix(3, 2) @ vectorize(Y), vectorize(Y.T))


def test_pseudoinverse_examples():
    np.testing.assert_allclose(pseudoinverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    np.testing.assert_array_equal(pseudoinverse(np.zeros((3, 2))), np.zeros((2, 3)))


@pytest.mark.parametrize("seed", range(20))
def test_penrose_identities(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 3))
    P = pseudoinverse(A)
    np.testing.assert_allclose(A @ P @ A, A, atol=1e-10)
    np.testing.assert_allclose(P @ A @ P, P, atol=1e-10)
    np.testing.assert_allclose((A @ P).T, A @ P, atol=1e-10)
    np.testing.assert_allclose((P @ A).T, P @ A, atol=1e-10)
    # A A^+ projects onto the column span
    np.testing.assert_allclose(A @ P @ A[:, 0], A[:, 0], atol=1e-10)


def test_psd_project_and_positive_part():
    np.testing.assert_allclose(psd_project(np.diag([1.0, -2.0])), np.diag([1.0, 0.0]))
    np.testing.assert_array_equal(positive_part([3, -1, 0]), [3, 0, 0])
    rng = np.random.default_rng(1)
    G = rng.standard_normal((4, 4))
    S = G @ G.T
    np.testing.assert_allclose(psd_project(S), S, atol=1e-12)
    with pytest.raises(ValidationError):
        psd_project(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_symmetric_basis_orthonormal():
    S = symmetric_basis(4)
    assert S.shape == (16, 10)
    np.testing.assert_allclose(S.T @ S, np.eye(10), atol=1e-14)
    M = materialize(S[:, 3], 4)
    np.testing.assert_array_equal(M, M.T)


def test_error_vector_zero_when_equal():
    X = np.array([[1.0, 0.0], [0.5, 2.0], [0.0, 1.0]])
    ej = build_error_jacobian(FactorPair(X, X))
    assert ej.e_norm == 0.0
    assert not np.any(ej.e)


def test_error_vector_hand_example():
    fp = FactorPair(np.array([[0.0], [1.0]]), np.array([[np.sqrt(2)], [0.0]]))
    ej = build_error_jacobian(fp)
    np.testing.assert_allclose(materialize(ej.e, 2), np.diag([-2.0, 1.0]), atol=1e-15)
    assert ej.e_norm == pytest.approx(np.sqrt(5), abs=1e-15)


def test_error_vector_pads_z():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((4, 3))
    Z = rng.standard_normal((4, 1))
    ej = build_error_jacobian(FactorPair(X, Z))
    np.testing.assert_allclose(ej.e, vectorize(X @ X.T - Z @ Z.T), atol=1e-14)
    assert ej.J.shape == (16, 12)


def test_jacobian_defining_identity():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((4, 2))
    J = build_error_jacobian(FactorPair(X, X[:, :1])).J
    for _ in range(20):
        Y = rng.standard_normal((4, 2))
        np.testing.assert_allclose(J @ vectorize(Y), vectorize(X @ Y.T + Y @ X.T), atol=1e-12)


def test_factor_pair_validation():
    with pytest.raises(ValidationError):
        FactorPair(np.ones((3, 1)), np.ones((3, 2)))
    with pytest.raises(DimensionMismatch):
        FactorPair(np.ones((3, 2)), np.ones((4, 1)))
    Z = np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]])
    with pytest.raises(ValidationError):
        FactorPair(np.ones((3, 2)), Z)


def _direct_residual_projector(X):
    J = build_error_jacobian(FactorPair(X, X[:, :1], check_rank=False)).J
    U, s, _ = np.linalg.svd(J, full_matrices=False)
    Q = U[:, s > 1e-9 * s.max()] if s.max() > 0 else U[:, :0]
    return np.eye(J.shape[0]) - Q @ Q.T


def _sym_projector(n):
    S = symmetric_basis(n)
    return S @ S.T


def test_residual_projector_examples():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((3, 4))
    np.testing.assert_allclose(residual_projector(X), 0.0, atol=1e-12)
    np.testing.assert_array_equal(residual_projector(np.zeros((3, 1))), np.eye(9))
    X = rng.standard_normal((4, 2))
    Ps = _sym_projector(4)
    diff = (residual_projector(X) - _direct_residual_projector(X)) @ Ps
    assert np.linalg.norm(diff) <= 1e-10


def test_residual_projector_identity_many():
    # the Kronecker form agrees with I - JJ^+ on symmetric matrices; on the
    # skew complement I - JJ^+ is the identity because range(J) is symmetric
    rng = np.random.default_rng(6)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        r = int(rng.integers(1, n + 1))
        X = rng.standard_normal((n, r))
        Ps = _sym_projector(n)
        direct = _direct_residual_projector(X)
        kron_form = residual_projector(X)
        assert np.abs((kron_form - direct) @ Ps).max() <= 1e-10
        full = kron_form @ Ps + (np.eye(n * n) - Ps)
        assert np.abs(full - direct).max() <= 1e-10


def test_jte_nonzero_for_full_rank_x():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 6))
        r = int(rng.integers(1, n))
        rs = int(rng.integers(1, r + 1))
        fp = FactorPair(rng.standard_normal((n, r)), rng.standard_normal((n, rs)))
        ej = build_error_jacobian(fp)
        assert np.linalg.norm(pseudoinverse(ej.J) @ ej.e) > 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_jacobian_range_is_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, max(1, n - 1)))
    J = build_error_jacobian(FactorPair(X, X[:, :1])).J
    S = symmetric_basis(n)
    np.testing.assert_allclose(S @ (S.T @ J), J, atol=1e-12)
