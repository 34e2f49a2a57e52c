"""Continuous algebraic Riccati machinery.

The pointwise gains of the stabilizer come from solving

    A' P + P A - P B R^-1 B' P + Q = 0

at every controller evaluation, so the solver here is a Kleinman-Newton
iteration: each step is a single Lyapunov solve, there is no eigensolver,
and a stabilizing warm start from the previous evaluation cuts the
iteration count to a handful. For block-companion systems (chain of
integrators with an unknown bottom row) a stabilizing start is available
in closed form, see :func:`bootstrap_stabilizing_gain`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SingularMatrixError, SolverError
from .matops import PIVOT_RTOL, _norm_inf, as_matrix, norm_fro, solve_linear

# Relative step tolerance for declaring the Kleinman-Newton iteration done.
STEP_RTOL = 1e-11

# Absolute Frobenius bound the final Riccati residual must meet.
RESIDUAL_TOL = 1e-8

MAX_ITERATIONS = 100


@dataclass(frozen=True)
class CareProblem:
    """One continuous algebraic Riccati problem.

    Fields
    ------
    a : (m, m) system matrix
    b : (m, n_in) input matrix
    q : (m, m) symmetric state weight
    r : (n_in, n_in) symmetric positive definite control weight
    """

    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a, "a")
        b = as_matrix(self.b, "b")
        q = as_matrix(self.q, "q")
        r = as_matrix(self.r, "r")
        m = a.shape[0]
        if a.shape[1] != m:
            raise DimensionError(f"care: a must be square, got {a.shape}")
        if b.shape[0] != m:
            raise DimensionError(f"care: b has {b.shape[0]} rows, expected {m}")
        if q.shape != (m, m):
            raise DimensionError(f"care: q must be {(m, m)}, got {q.shape}")
        n_in = b.shape[1]
        if r.shape != (n_in, n_in):
            raise DimensionError(f"care: r must be {(n_in, n_in)}, got {r.shape}")
        _require_symmetric(q, "q")
        _require_symmetric(r, "r")
        if not is_positive_definite(r):
            raise DimensionError("care: r must be positive definite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "q", 0.5 * (q + q.T))
        object.__setattr__(self, "r", 0.5 * (r + r.T))


@dataclass(frozen=True)
class CareSolution:
    """Solution of a :class:`CareProblem`.

    ``step_norms`` holds the Frobenius norms of successive iterate
    differences, useful for monotonicity diagnostics.
    """

    p: np.ndarray
    k: np.ndarray
    residual_norm: float
    iterations: int
    step_norms: tuple[float, ...] = field(default=())


def _require_symmetric(m: np.ndarray, name: str) -> None:
    if _norm_inf(m - m.T) > 1e-10 * (1.0 + _norm_inf(m)):
        raise DimensionError(f"care: {name} must be symmetric")


def solve_lyapunov(a, q) -> np.ndarray:
    """Solve ``a' P + P a + q = 0`` by Kronecker-sum vectorization.

    Raises
    ------
    SingularMatrixError
        If the Kronecker-sum system is singular, i.e. ``a`` has a pair of
        eigenvalues summing to zero (marginally stable directions included).
    """
    am = as_matrix(a, "a")
    qm = as_matrix(q, "q")
    m = am.shape[0]
    if am.shape[1] != m or qm.shape != (m, m):
        raise DimensionError(
            f"solve_lyapunov: incompatible shapes {am.shape}, {qm.shape}")
    at = am.T
    eye = np.eye(m)
    ksum = (np.einsum("ik,jl->ijkl", eye, at)
            + np.einsum("ik,jl->ijkl", at, eye)).reshape(m * m, m * m)
    try:
        vec = np.linalg.solve(ksum, -qm.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            "solve_lyapunov: singular Kronecker-sum system (a has "
            "eigenvalue pairs summing to zero)") from exc
    if not np.isfinite(vec).all():
        raise SingularMatrixError(
            "solve_lyapunov: Kronecker-sum solve produced non-finite values")
    p = vec.reshape((m, m), order="F")
    if _norm_inf(qm - qm.T) <= 1e-12 * (1.0 + _norm_inf(qm)):
        p = 0.5 * (p + p.T)
    return p


def is_hurwitz(a) -> bool:
    """Whether all eigenvalues of ``a`` have strictly negative real part.

    Certified through a Lyapunov solve: ``a`` is Hurwitz exactly when
    ``a' P + P a + I = 0`` is solvable with positive definite ``P``.
    """
    am = as_matrix(a, "a")
    if am.shape[0] != am.shape[1]:
        raise DimensionError(f"is_hurwitz: matrix must be square, got {am.shape}")
    try:
        p = solve_lyapunov(am, np.eye(am.shape[0]))
    except SingularMatrixError:
        return False
    return is_positive_definite(p)


def is_positive_definite(p) -> bool:
    """Cholesky test after symmetrization.

    True when every Cholesky pivot exceeds ``1e-12 * norm(p, inf)``.
    """
    pm = as_matrix(p, "p")
    if pm.shape[0] != pm.shape[1]:
        raise DimensionError(
            f"is_positive_definite: matrix must be square, got {pm.shape}")
    s = 0.5 * (pm + pm.T)
    threshold = PIVOT_RTOL * _norm_inf(s)
    try:
        low = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        return False
    pivots = np.diagonal(low) ** 2
    return bool(np.all(pivots > threshold))


def bootstrap_stabilizing_gain(f_hat, g_hat) -> np.ndarray:
    """Stabilizing start gain for a block-companion system.

    For the system with state blocks chained as integrators and bottom-row
    dynamics ``F x + G u`` (``f_hat`` of shape ``(n, k n)``, ``g_hat`` of
    shape ``(n, n)`` invertible), the gain

        K0 = G^-1 (F + L)

    cancels the bottom row and replaces it with fixed coefficients ``L``
    that place every channel's closed-loop polynomial at ``(s + 1)^k``,
    so ``A - B K0`` is Hurwitz by construction.
    """
    f = as_matrix(f_hat, "f_hat")
    g = as_matrix(g_hat, "g_hat")
    n = f.shape[0]
    if g.shape != (n, n):
        raise DimensionError(
            f"bootstrap: g_hat must be {(n, n)}, got {g.shape}")
    if f.shape[1] % n != 0:
        raise DimensionError(
            f"bootstrap: f_hat width {f.shape[1]} not a multiple of n={n}")
    k = f.shape[1] // n
    eye = np.eye(n)
    lam = np.hstack([math.comb(k, i) * eye for i in range(k)])
    return solve_linear(g, f + lam)


def solve_care(prob: CareProblem, k0=None) -> CareSolution:
    """Kleinman-Newton iteration for the continuous Riccati equation.

    Parameters
    ----------
    prob : CareProblem
    k0 : array_like, optional
        Stabilizing start gain of shape ``(n_in, m)``. When omitted, a
        start is derived automatically: the zero gain if ``a`` is already
        Hurwitz, or the companion bootstrap when ``(a, b)`` carries
        block-companion structure.

    Returns
    -------
    CareSolution

    Raises
    ------
    SolverError
        If no stabilizing start is available, an iterate loses positive
        definiteness, the iteration fails to converge within
        ``MAX_ITERATIONS``, or the final residual exceeds ``RESIDUAL_TOL``.
    """
    a, b, q, r = prob.a, prob.b, prob.q, prob.r
    m, n_in = b.shape
    if k0 is None:
        k = _initial_gain(a, b)
    else:
        k = as_matrix(k0, "k0")
        if k.shape != (n_in, m):
            raise DimensionError(f"solve_care: k0 must be {(n_in, m)}, got {k.shape}")

    prev = None
    step_norms: list[float] = []
    p = None
    for it in range(1, MAX_ITERATIONS + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            a_cl = a - b @ k
            rhs = q + k.T @ r @ k
        if not (np.isfinite(a_cl).all() and np.isfinite(rhs).all()):
            raise SolverError(
                f"solve_care: iterate {it} overflowed; iteration diverged")
        try:
            p = solve_lyapunov(a_cl, rhs)
        except SingularMatrixError as exc:
            raise SolverError(
                f"solve_care: iterate {it} is not stabilizing "
                f"(Lyapunov system singular)") from exc
        if not is_positive_definite(p):
            raise SolverError(
                f"solve_care: iterate {it} lost positive definiteness; "
                f"start gain was not stabilizing")
        try:
            k_next = np.linalg.solve(r, b.T @ p)
        except np.linalg.LinAlgError as exc:
            raise SolverError("solve_care: gain update solve failed") from exc
        if prev is not None:
            d = norm_fro(p - prev)
            step_norms.append(d)
            if d <= STEP_RTOL * norm_fro(p):
                k = k_next
                break
        prev = p
        k = k_next
    else:
        raise SolverError(
            f"solve_care: no convergence within {MAX_ITERATIONS} iterations "
            f"(last step {step_norms[-1] if step_norms else float('nan'):.3e})")

    residual = a.T @ p + p @ a - k.T @ r @ k + q
    rn = norm_fro(residual)
    if rn > RESIDUAL_TOL:
        raise SolverError(
            f"solve_care: residual {rn:.3e} above tolerance {RESIDUAL_TOL:.1e}")
    if not is_hurwitz(a - b @ k):
        raise SolverError("solve_care: final gain fails the Hurwitz certificate")
    return CareSolution(p=p, k=k, residual_norm=rn, iterations=it,
                        step_norms=tuple(step_norms))


def _initial_gain(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Derive a stabilizing start gain or fail loudly."""
    m, n_in = b.shape
    if m % n_in == 0:
        k = m // n_in
        shift = np.hstack([np.zeros((m - n_in, n_in)), np.eye(m - n_in)])
        structured = (
            _norm_inf(a[: m - n_in] - shift) <= 1e-9 * (1.0 + _norm_inf(a))
            and _norm_inf(b[: m - n_in]) <= 1e-9 * (1.0 + _norm_inf(b))
        )
        if structured:
            try:
                return bootstrap_stabilizing_gain(a[m - n_in:], b[m - n_in:])
            except SingularMatrixError:
                pass
    if is_hurwitz(a):
        return np.zeros((n_in, m))
    raise SolverError(
        "solve_care: no stabilizing start gain available (matrix is neither "
        "Hurwitz nor block-companion with invertible bottom input block); "
        "pass k0 explicitly")
