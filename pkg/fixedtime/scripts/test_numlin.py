"""
Tests for the dense linear algebra kernel
"""

import numpy as np
import pytest
import scipy.linalg as sla

from errors import DimensionError, DomainError, SingularMatrixError
from numlin import (
    as_matrix, condition_estimate, controllability_matrix, determinant, is_controllable, kron,
    mat_exp, matrix_power, numerical_rank, solve,
)
from oracle_utils import random_controllable_pair


def test_mat_exp_of_zero_is_identity():
    np.testing.assert_array_equal(mat_exp(np.zeros((2, 2)), 5.0), np.eye(2))


def test_mat_exp_at_time_zero_is_exact_identity(rng):
    A = rng.standard_normal((4, 4))
    np.testing.assert_array_equal(mat_exp(A, 0.0), np.eye(4))


@pytest.mark.parametrize("t", [0.3, 1.0, 7.5, -2.0])
def test_mat_exp_nilpotent(t):
    np.testing.assert_allclose(mat_exp(np.array([[0.0, 1.0], [0.0, 0.0]]), t),
                               [[1.0, t], [0.0, 1.0]], atol=1e-14)


def test_mat_exp_diagonal():
    a, b = 0.7, -1.3
    np.testing.assert_allclose(mat_exp(np.diag([a, b]), 1.0), np.diag([np.exp(a), np.exp(b)]), rtol=1e-14)


@pytest.mark.parametrize("scale", [1e-3, 0.1, 1.0, 10.0, 40.0])
def test_mat_exp_matches_scipy_across_pade_orders(rng, scale):
    A = rng.standard_normal((5, 5)) * scale / 5
    expected = sla.expm(A)
    np.testing.assert_allclose(mat_exp(A), expected, rtol=1e-10, atol=1e-12 * np.abs(expected).max())


def test_mat_exp_inverse_and_semigroup(rng):
    for _ in range(10):
        A = 0.5 * rng.standard_normal((4, 4))
        A -= (np.linalg.eigvals(A).real.max() + 0.1) * np.eye(4)
        t, s = rng.uniform(-1, 1, size=2)
        assert np.linalg.norm(mat_exp(A, t) @ mat_exp(A, -t) - np.eye(4)) <= 1e-10
        assert np.linalg.norm(mat_exp(A, s) @ mat_exp(A, t) - mat_exp(A, s + t)) <= 1e-9


def test_mat_exp_rejects_non_square():
    with pytest.raises(DimensionError):
        mat_exp(np.zeros((2, 3)))


def test_mat_exp_rejects_non_finite_time():
    with pytest.raises(DomainError):
        mat_exp(np.eye(2), float('nan'))


def test_as_matrix_rejects_nan():
    with pytest.raises(DomainError):
        as_matrix([[1.0, float('nan')]])


def test_solve_identity_and_diagonal(rng):
    B = rng.standard_normal((3, 2))
    np.testing.assert_allclose(solve(np.eye(3), B), B)
    np.testing.assert_allclose(solve(np.diag([2.0, 4.0]), np.array([[2.0], [8.0]])), [[1.0], [2.0]])


def test_solve_double_integrator_phi_inverse():
    phi = np.array([[-1 / 6, 1 / 2], [-1 / 2, 1.0]])
    np.testing.assert_allclose(solve(phi, np.eye(2)), [[12.0, -6.0], [6.0, -2.0]], rtol=1e-12)


def test_solve_vector_rhs_keeps_shape():
    x = solve(np.array([[2.0, 1.0], [1.0, 3.0]]), np.array([3.0, 5.0]))
    assert x.shape == (2,)
    np.testing.assert_allclose(x, [0.8, 1.4])


def test_solve_round_trip_well_conditioned(rng):
    for _ in range(10):
        Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        A = Q @ np.diag(rng.uniform(1.0, 100.0, 5)) @ Q.T
        B = rng.standard_normal((5, 3))
        assert np.linalg.norm(A @ solve(A, B) - B) <= 1e-10 * np.linalg.norm(B)


def test_solve_singular_reports_pivot():
    with pytest.raises(SingularMatrixError) as excinfo:
        solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.eye(2))
    assert excinfo.value.pivot < 1e-12


def test_solve_rejects_row_mismatch():
    with pytest.raises(DimensionError):
        solve(np.eye(3), np.ones((2, 1)))


def test_determinant_and_condition():
    phi = np.array([[-1 / 6, 1 / 2], [-1 / 2, 1.0]])
    assert determinant(phi) == pytest.approx(1 / 12, rel=1e-12)
    assert determinant(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(-1.0)
    assert condition_estimate(np.array([[1.0, 2.0], [2.0, 4.0]])) == float('inf')
    assert condition_estimate(np.eye(3)) == pytest.approx(1.0)


@pytest.mark.parametrize("A, B, expected", [
    ([[0, 1], [0, 0]], [[0], [1]], [[0, 1], [1, 0]]),
    ([[1, 0], [0, 1]], [[1], [0]], [[1, 1], [0, 0]]),
    ([[0, 1], [-1, 0]], [[0], [1]], [[0, 1], [1, 0]]),
])
def test_controllability_matrix_examples(A, B, expected):
    np.testing.assert_array_equal(controllability_matrix(np.array(A, float), np.array(B, float)), expected)


def test_is_controllable_examples():
    assert is_controllable(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]))
    assert not is_controllable(np.diag([1.0, 2.0]), np.array([[1.0], [0.0]]))


def test_controllability_invariant_under_similarity(rng):
    for _ in range(10):
        A, B = random_controllable_pair(rng, 4, 1)
        T = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        T_inv = np.linalg.inv(T)
        assert is_controllable(T @ A @ T_inv, T @ B) == is_controllable(A, B)


def test_controllability_of_b_matches_b_bt(rng):
    A, B = random_controllable_pair(rng, 5, 2)
    assert is_controllable(A, B) == is_controllable(A, B @ B.T)
    assert not is_controllable(np.diag([1.0, 2.0]), np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_numerical_rank_tolerance():
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.diag([1.0, 1e-12, 1.0])) == 2
    assert numerical_rank(np.diag([1.0, 1e-9, 1.0])) == 3


def test_kron_and_matrix_power():
    np.testing.assert_array_equal(kron(np.eye(2), [[1, 2], [3, 4]]),
                                  [[1, 2, 0, 0], [3, 4, 0, 0], [0, 0, 1, 2], [0, 0, 3, 4]])
    np.testing.assert_array_equal(matrix_power(np.array([[1.0, 1.0], [0.0, 1.0]]), 0), np.eye(2))
    np.testing.assert_array_equal(matrix_power(np.array([[1.0, 1.0], [0.0, 1.0]]), 3), [[1, 3], [0, 1]])
    with pytest.raises(DomainError):
        matrix_power(np.eye(2), -1)
