"""Small dense matrix kernel.

Everything in this package runs at desk scale (state dimensions around a
dozen), so the kernels favour explicit, checkable semantics over speed:
elimination routines carry relative pivot thresholds and raise
:class:`~sdreso.errors.SingularMatrixError` instead of returning garbage,
and every public entry point validates shapes and finiteness up front.

Matrices are plain ``numpy.ndarray`` objects (2-D, float64); vectors are
1-D arrays.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, EvaluationError, SingularMatrixError

# Relative pivot threshold for declaring a matrix singular during elimination.
PIVOT_RTOL = 1e-12

# Default relative tolerance for numerical rank decisions.
RANK_RTOL = 1e-9


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D float array, requiring finite entries."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise EvaluationError(f"{name} contains non-finite entries")
    return m


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Coerce ``a`` to a 1-D float array, requiring finite entries."""
    v = np.asarray(a, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise EvaluationError(f"{name} contains non-finite entries")
    return v


def hadamard(a, b) -> np.ndarray:
    """Elementwise product of two equally shaped matrices."""
    am, bm = as_matrix(a, "a"), as_matrix(b, "b")
    if am.shape != bm.shape:
        raise DimensionError(f"hadamard: shapes {am.shape} and {bm.shape} differ")
    return am * bm


def kronecker(a, b) -> np.ndarray:
    """Kronecker product of two matrices."""
    am, bm = as_matrix(a, "a"), as_matrix(b, "b")
    (ra, ca), (rb, cb) = am.shape, bm.shape
    return (am[:, None, :, None] * bm[None, :, None, :]).reshape(ra * rb, ca * cb)


def oslash(a, b) -> np.ndarray:
    """Outer division of two vectors.

    Returns the matrix ``C`` with ``C[i, j] = a[i] / b[j]``.

    Parameters
    ----------
    a : array_like, shape (m,)
    b : array_like, shape (q,)
        Denominator vector; must have no zero entries.

    Raises
    ------
    SingularMatrixError
        If any entry of ``b`` is exactly zero.
    """
    av, bv = as_vector(a, "a"), as_vector(b, "b")
    if np.any(bv == 0.0):
        raise SingularMatrixError("oslash: zero entry in denominator vector")
    return np.outer(av, 1.0 / bv)


def _eliminate(m: np.ndarray, pivot_tol: float) -> tuple[np.ndarray, int]:
    """Row-reduce ``m`` in place with partial pivoting.

    Returns the reduced array and the number of pivots whose magnitude
    exceeded ``pivot_tol``. Works on rectangular arrays.
    """
    rows, cols = m.shape
    r = 0
    npiv = 0
    for c in range(cols):
        if r >= rows:
            break
        p = r + int(np.argmax(np.abs(m[r:, c])))
        if abs(m[p, c]) <= pivot_tol:
            continue
        if p != r:
            m[[r, p]] = m[[p, r]]
        m[r + 1:] -= np.outer(m[r + 1:, c] / m[r, c], m[r])
        npiv += 1
        r += 1
    return m, npiv


def solve_linear(a, b) -> np.ndarray:
    """Solve the square system ``a @ x = b`` by partial-pivot elimination.

    Parameters
    ----------
    a : array_like, shape (p, p)
    b : array_like, shape (p,) or (p, q)
        One right-hand side or several stacked as columns.

    Returns
    -------
    numpy.ndarray
        Solution with the same trailing shape as ``b``.

    Raises
    ------
    SingularMatrixError
        If a pivot falls below ``PIVOT_RTOL * norm(a, inf)``, i.e. the
        system is singular to working precision.
    """
    am = as_matrix(a, "a")
    p, q = am.shape
    if p != q:
        raise DimensionError(f"solve_linear: matrix must be square, got {am.shape}")
    bv = np.asarray(b, dtype=float)
    single = bv.ndim == 1
    if single:
        bv = bv[:, None]
    if bv.shape[0] != p:
        raise DimensionError(
            f"solve_linear: rhs has {bv.shape[0]} rows, expected {p}")
    if not np.all(np.isfinite(bv)):
        raise EvaluationError("solve_linear: rhs contains non-finite entries")

    tol = PIVOT_RTOL * _norm_inf(am)
    aug = np.hstack([am, bv])
    for c in range(p):
        piv = c + int(np.argmax(np.abs(aug[c:, c])))
        if abs(aug[piv, c]) <= tol:
            raise SingularMatrixError(
                f"solve_linear: pivot {abs(aug[piv, c]):.3e} below threshold "
                f"{tol:.3e} at column {c}")
        if piv != c:
            aug[[c, piv]] = aug[[piv, c]]
        aug[c + 1:] -= np.outer(aug[c + 1:, c] / aug[c, c], aug[c])
    x = np.empty((p, bv.shape[1]))
    for i in range(p - 1, -1, -1):
        x[i] = (aug[i, p:] - aug[i, i + 1:p] @ x[i + 1:]) / aug[i, i]
    return x[:, 0] if single else x


def jacobian_fd(f: Callable[[np.ndarray], np.ndarray], x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x``.

    ``f`` maps an ``(m,)`` vector to a ``(q,)`` vector; the result has shape
    ``(q, m)``. The step ``h`` is applied per coordinate.

    Raises
    ------
    EvaluationError
        If ``f`` returns non-finite values at any probe point.
    """
    xv = as_vector(x, "x")
    if not h > 0:
        raise DimensionError("jacobian_fd: step h must be positive")
    cols = []
    for i in range(xv.size):
        xp = xv.copy()
        xm = xv.copy()
        xp[i] += h
        xm[i] -= h
        fp = np.asarray(f(xp), dtype=float)
        fm = np.asarray(f(xm), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise EvaluationError(
                f"jacobian_fd: function returned non-finite values near "
                f"coordinate {i}")
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols)


def rank(a, tol: float = RANK_RTOL) -> int:
    """Numerical rank by row elimination.

    A pivot counts when its magnitude exceeds ``tol * norm(a, inf)``. The
    zero matrix has rank 0 by convention.
    """
    am = as_matrix(a, "a").copy()
    threshold = tol * _norm_inf(am)
    if threshold == 0.0:
        return 0
    _, npiv = _eliminate(am, threshold)
    return npiv


def _norm_inf(a: np.ndarray) -> float:
    """Max absolute row sum; max |entry| for vectors."""
    if a.ndim == 1:
        return float(np.max(np.abs(a))) if a.size else 0.0
    if a.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(a), axis=1)))


def norm_fro(a) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(a, dtype=float)))


def stack_blocks(blocks: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """Assemble a block matrix from a 2-D nest of conforming arrays."""
    return np.block([[np.asarray(b, dtype=float) for b in row] for row in blocks])
