"""Riccati and Lyapunov solver checks.

The 2x2 chain-integrator problem has a hand-solvable solution used as a
frozen oracle; randomized problems are cross-checked against scipy,
which uses an unrelated (Schur-based) algorithm.
"""

import math

import numpy as np
import pytest
import scipy.linalg

from sdreso.errors import DimensionError, SingularMatrixError, SolverError
from sdreso.riccati import (CareProblem, bootstrap_stabilizing_gain,
                            is_hurwitz, is_positive_definite, solve_care,
                            solve_lyapunov)

SQRT3 = math.sqrt(3.0)


def chain_pair():
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    b = np.array([[0.0], [1.0]])
    return a, b


def test_chain_integrator_closed_form():
    # scalar expansion of the quadratic matrix equation gives
    # p12 = 1, p11 = p22 = sqrt(3), gain = (1, sqrt(3))
    a, b = chain_pair()
    sol = solve_care(CareProblem(a, b, np.eye(2), np.eye(1)))
    expect = np.array([[SQRT3, 1.0], [1.0, SQRT3]])
    assert np.allclose(sol.p, expect, atol=1e-8)
    assert np.allclose(sol.k, [[1.0, SQRT3]], atol=1e-8)
    assert sol.residual_norm <= 1e-8


def test_random_problems_match_scipy():
    rng = np.random.default_rng(21)
    done = 0
    while done < 40:
        m = int(rng.integers(2, 6))
        n_in = int(rng.integers(1, m + 1))
        a = rng.normal(size=(m, m))
        b = rng.normal(size=(m, n_in))
        q = np.eye(m)
        r = np.eye(n_in)
        try:
            sol = solve_care(CareProblem(a, b, q, r))
        except SolverError:
            continue  # unstabilizable draw; scipy would fail too
        ref = scipy.linalg.solve_continuous_are(a, b, q, r)
        assert np.allclose(sol.p, ref, rtol=1e-6, atol=1e-8)
        assert is_hurwitz(a - b @ sol.k)
        assert is_positive_definite(sol.p)
        assert sol.residual_norm <= 1e-8
        done += 1


def test_step_norms_terminate_small():
    a, b = chain_pair()
    sol = solve_care(CareProblem(a, b, np.eye(2), np.eye(1)))
    assert sol.iterations >= 1
    assert sol.step_norms[-1] <= 1e-10 * (1 + np.linalg.norm(sol.p))


def test_warm_start_accepts_given_gain():
    a, b = chain_pair()
    cold = solve_care(CareProblem(a, b, np.eye(2), np.eye(1)))
    warm = solve_care(CareProblem(a, b, np.eye(2), np.eye(1)), k0=cold.k)
    assert np.allclose(warm.p, cold.p, atol=1e-10)
    assert warm.iterations <= cold.iterations


def test_solve_lyapunov_diagonal_oracle():
    # A = diag(-1, -2), Q = I  =>  P = diag(1/2, 1/4)
    p = solve_lyapunov(np.diag([-1.0, -2.0]), np.eye(2))
    assert np.allclose(p, np.diag([0.5, 0.25]), atol=1e-12)


def test_solve_lyapunov_matches_scipy():
    rng = np.random.default_rng(22)
    for _ in range(20):
        m = int(rng.integers(2, 6))
        a = rng.normal(size=(m, m)) - (m + 2) * np.eye(m)
        q = rng.normal(size=(m, m))
        q = q + q.T + 2 * m * np.eye(m)
        p = solve_lyapunov(a, q)
        resid = a.T @ p + p @ a + q
        assert np.max(np.abs(resid)) <= 1e-8 * max(1.0, np.max(np.abs(q)))
        ref = scipy.linalg.solve_continuous_lyapunov(a.T, -q)
        assert np.allclose(p, ref, rtol=1e-8, atol=1e-10)


def test_solve_lyapunov_singular_spectrum_raises():
    # eigenvalues +1 and -1 sum to zero across the pair
    with pytest.raises(SingularMatrixError):
        solve_lyapunov(np.diag([1.0, -1.0]), np.eye(2))


def test_is_hurwitz():
    assert is_hurwitz(np.diag([-1.0, -0.5]))
    assert not is_hurwitz(np.diag([-1.0, 0.5]))
    assert not is_hurwitz(np.array([[0.0, 1.0], [-1.0, 0.0]]))  # marginal


def test_is_positive_definite():
    assert is_positive_definite(np.eye(3))
    assert not is_positive_definite(np.diag([1.0, 0.0]))
    assert not is_positive_definite(np.diag([1.0, -1e-3]))


def test_bootstrap_gain_stabilizes_companion_pairs():
    rng = np.random.default_rng(23)
    for _ in range(30):
        k, n = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        kn = k * n
        f_hat = rng.uniform(-5, 5, size=(n, kn))
        g_hat = rng.normal(size=(n, n)) + 2 * n * np.eye(n)
        k0 = bootstrap_stabilizing_gain(f_hat, g_hat)
        a = np.zeros((kn, kn))
        if kn > n:
            a[: kn - n, n:] = np.eye(kn - n)
        a[kn - n:] = f_hat
        b = np.zeros((kn, n))
        b[kn - n:] = g_hat
        assert is_hurwitz(a - b @ k0)


def test_solve_care_rejects_bad_weights():
    a, b = chain_pair()
    with pytest.raises(DimensionError):
        solve_care(CareProblem(a, b, np.array([[1.0, 2.0], [0.0, 1.0]]),
                               np.eye(1)))
    with pytest.raises(DimensionError):
        solve_care(CareProblem(a, b, np.eye(2), -np.eye(1)))


def test_solve_care_unstabilizable_raises():
    a = np.diag([1.0, 2.0])  # unstable, unreachable modes
    b = np.zeros((2, 1))
    with pytest.raises(SolverError):
        solve_care(CareProblem(a, b, np.eye(2), np.eye(1)))
