"""Dense kernel checks against numpy oracles and hand values."""

import numpy as np
import pytest

from sdreso.errors import (DimensionError, EvaluationError,
                           SingularMatrixError)
from sdreso.matops import (PIVOT_RTOL, as_matrix, as_vector, hadamard,
                           jacobian_fd, kronecker, norm_fro, oslash, rank,
                           solve_linear, stack_blocks)


def test_as_matrix_rejects_bad_input():
    with pytest.raises(DimensionError):
        as_matrix(np.zeros(3))
    with pytest.raises(EvaluationError):
        as_matrix([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(EvaluationError):
        as_vector([np.inf, 1.0])


def test_hadamard_and_oslash_hand_values():
    a = [[1.0, 2.0], [3.0, 4.0]]
    b = [[5.0, 6.0], [7.0, 8.0]]
    assert np.array_equal(hadamard(a, b), [[5.0, 12.0], [21.0, 32.0]])

    c = oslash([6.0, 8.0], [2.0, 4.0])
    assert np.array_equal(c, [[3.0, 1.5], [4.0, 2.0]])
    with pytest.raises(SingularMatrixError):
        oslash([1.0], [0.0])


def test_kronecker_matches_numpy():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = rng.normal(size=(rng.integers(1, 4), rng.integers(1, 4)))
        b = rng.normal(size=(rng.integers(1, 4), rng.integers(1, 4)))
        assert np.allclose(kronecker(a, b), np.kron(a, b), atol=1e-14)


def test_solve_linear_matches_numpy():
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = int(rng.integers(1, 7))
        a = rng.normal(size=(p, p)) + p * np.eye(p)
        x = rng.normal(size=p)
        got = solve_linear(a, a @ x)
        assert np.allclose(got, x, atol=1e-9)


def test_solve_linear_matrix_rhs():
    rng = np.random.default_rng(12)
    a = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    x = rng.normal(size=(4, 3))
    got = solve_linear(a, a @ x)
    assert got.shape == (4, 3)
    assert np.allclose(got, x, atol=1e-9)


def test_solve_linear_singular_raises():
    with pytest.raises(SingularMatrixError):
        solve_linear([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])
    # pivot below the relative threshold counts as singular too
    eps = PIVOT_RTOL / 10
    with pytest.raises(SingularMatrixError):
        solve_linear([[1.0, 1.0], [1.0, 1.0 + eps]], [1.0, 1.0])


def test_solve_linear_shape_errors():
    with pytest.raises(DimensionError):
        solve_linear(np.ones((2, 3)), np.ones(2))
    with pytest.raises(DimensionError):
        solve_linear(np.eye(2), np.ones(3))


def test_rank_matches_numpy():
    rng = np.random.default_rng(13)
    for _ in range(30):
        p, q = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        r = int(rng.integers(0, min(p, q) + 1))
        m = (rng.normal(size=(p, r)) @ rng.normal(size=(r, q))
             if r else np.zeros((p, q)))
        assert rank(m) == np.linalg.matrix_rank(m)


def test_jacobian_fd_against_analytic():
    def f(x):
        return np.array([x[0] ** 2 + x[1], np.sin(x[0]) * x[1]])

    x = np.array([0.7, -1.3])
    expect = np.array([[2 * x[0], 1.0],
                       [np.cos(x[0]) * x[1], np.sin(x[0])]])
    assert np.allclose(jacobian_fd(f, x), expect, atol=1e-8)


def test_stack_blocks_matches_numpy_block():
    a = np.ones((2, 2))
    b = np.zeros((2, 1))
    c = 2 * np.ones((1, 2))
    d = 3 * np.ones((1, 1))
    got = stack_blocks([[a, b], [c, d]])
    assert np.array_equal(got, np.block([[a, b], [c, d]]))


def test_norm_fro():
    assert norm_fro([[3.0, 0.0], [0.0, 4.0]]) == pytest.approx(5.0)
