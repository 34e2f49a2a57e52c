"""State-dependent coefficient (SDC) factorizations from observer output.

The stabilizer never sees the true drift ``f``: it sees the observer's
extended-state estimate, the value ``f`` takes along the trajectory. The
builders here turn that pointwise value into a full coefficient matrix
``F`` satisfying the interpolation identity

    F(est) @ xhat == xhat_ext

which is what lets a Riccati controller act as if it knew a linear-like
model. Three constructions are provided: a smooth partition-of-unity
spread for systems with at least two channels, a closed-form smooth
variant for the scalar second-order case, and a discontinuous spread
that concentrates on the smallest state entry and therefore tolerates
zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, SingularStateError
from .matops import RANK_RTOL, as_matrix, as_vector, hadamard, oslash, rank


@dataclass(frozen=True)
class SystemDims:
    """Order ``k`` and channel count ``n`` of the plant.

    The stacked state has dimension ``k * n``; the extended estimate adds
    ``n`` more entries.
    """

    k: int
    n: int

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise DimensionError(f"dims: k and n must be >= 1, got {self}")

    @property
    def state_dim(self) -> int:
        return self.k * self.n


@dataclass(frozen=True)
class Estimate:
    """Observer output at one instant: state estimate plus extension."""

    xhat: np.ndarray
    xhat_ext: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "xhat", as_vector(self.xhat, "xhat"))
        object.__setattr__(self, "xhat_ext", as_vector(self.xhat_ext, "xhat_ext"))


# --- variant configurations -------------------------------------------------

IndexSetRule = Callable[[int, "SystemDims"], Sequence[int]]


def diagonal_index_set(i: int, dims: SystemDims) -> tuple[int, ...]:
    """Default concentration set for row ``i``: that channel's entries
    across all derivative blocks, ``{i, i+n, ..., i+(k-1)n}`` (0-based)."""
    return tuple(i + m * dims.n for m in range(dims.k))


@dataclass(frozen=True)
class ContinuousSdc:
    """Smooth partition-of-unity construction; requires ``n >= 2``.

    ``sharpness`` scales the exponent of the concentration weight
    ``p_i = exp(-sharpness * prod(|x_out|) / prod(|x_in|))``; ``gains``
    are per-channel nonzero mixing factors (all ones by default, which is
    also the only choice with bounded behaviour near the singular set).
    ``index_sets`` may override which entries each row concentrates on.
    """

    sharpness: float = 1.0
    gains: tuple[float, ...] | None = None
    index_sets: IndexSetRule | None = None

    def __post_init__(self):
        if not self.sharpness > 0:
            raise ConfigError("continuous variant: sharpness must be positive")
        if self.gains is not None and any(g == 0 for g in self.gains):
            raise ConfigError("continuous variant: gains must be nonzero")


@dataclass(frozen=True)
class ContinuousScalarSdc:
    """Closed-form smooth construction for ``k = 2, n = 1`` only."""


WeightRule = Callable[[int, int, int], float]


@dataclass(frozen=True)
class DiscontinuousSdc:
    """Smallest-entry concentration; defined wherever the estimate is not
    identically degenerate, zeros included.

    ``gains`` are the per-channel factors applied on the concentrated
    column. ``weights`` optionally reweights the remaining columns as a
    rule ``(i, j, j_star) -> w``; the reciprocals over ``j != j_star``
    must sum to one per row so the interpolation identity survives. The
    default spreads uniformly (``w = k n - 1``).
    """

    gains: tuple[float, ...] | None = None
    weights: WeightRule | None = None

    def __post_init__(self):
        if self.gains is not None and any(g == 0 for g in self.gains):
            raise ConfigError("discontinuous variant: gains must be nonzero")


SdcVariant = ContinuousSdc | ContinuousScalarSdc | DiscontinuousSdc


@dataclass(frozen=True)
class SdcInfo:
    """Build diagnostics: whether a smallest-entry tie was broken."""

    tie: bool = False


@dataclass(frozen=True)
class SdcFactorization:
    """Companion-form factorization ``(A, B)`` built around ``F`` and ``G``."""

    a_hat: np.ndarray
    b_hat: np.ndarray
    f_hat: np.ndarray
    g_hat: np.ndarray


# --- builders ---------------------------------------------------------------


def _check_estimate(est: Estimate, dims: SystemDims) -> None:
    if est.xhat.size != dims.state_dim:
        raise DimensionError(
            f"estimate: xhat has size {est.xhat.size}, expected {dims.state_dim}")
    if est.xhat_ext.size != dims.n:
        raise DimensionError(
            f"estimate: xhat_ext has size {est.xhat_ext.size}, expected {dims.n}")


def _row_gains(gains: tuple[float, ...] | None, n: int, label: str) -> np.ndarray:
    if gains is None:
        return np.ones(n)
    g = as_vector(gains, f"{label} gains")
    if g.size != n:
        raise DimensionError(
            f"{label} variant: expected {n} gains, got {g.size}")
    return g


def build_w_continuous(est: Estimate, dims: SystemDims,
                       variant: ContinuousSdc) -> np.ndarray:
    """Weight matrix of the smooth construction.

    Row ``i`` splits unit mass between the concentration set of that
    channel and its complement, steered by the exponential factor
    ``p_i``; every row sums to one by construction.

    Raises
    ------
    SingularStateError
        If any estimate entry is exactly zero (the products in ``p_i``
        degenerate there).
    DimensionError
        If ``n < 2`` (the complement set would be empty).
    """
    _check_estimate(est, dims)
    if dims.n < 2:
        raise DimensionError(
            "continuous variant needs n >= 2; use the scalar or "
            "discontinuous construction instead")
    xh = est.xhat
    if np.any(xh == 0.0):
        raise SingularStateError(
            "continuous variant: estimate has a zero entry")
    absx = np.abs(xh)
    gains = _row_gains(variant.gains, dims.n, "continuous")
    rule = variant.index_sets or diagonal_index_set
    kn = dims.state_dim
    w = np.empty((dims.n, kn))
    for i in range(dims.n):
        inside = np.zeros(kn, dtype=bool)
        members = tuple(rule(i, dims))
        if len(set(members)) != len(members):
            raise ConfigError(f"index set for row {i} has duplicates")
        for j in members:
            if not 0 <= j < kn:
                raise ConfigError(f"index set for row {i} out of range: {j}")
            inside[j] = True
        n_in = int(inside.sum())
        n_out = kn - n_in
        if n_in == 0 or n_out == 0:
            raise ConfigError(
                f"index set for row {i} must be a proper nonempty subset")
        ratio = float(np.prod(absx[~inside]) / np.prod(absx[inside]))
        p = math.exp(-variant.sharpness * ratio) if math.isfinite(ratio) else 0.0
        w[i, inside] = gains[i] * p / n_in
        w[i, ~inside] = (1.0 - gains[i] * p) / n_out
    return w


def build_f_continuous(est: Estimate, dims: SystemDims,
                       variant: ContinuousSdc) -> np.ndarray:
    """Smooth coefficient matrix: the weight matrix applied entrywise to
    the outer quotient of extension over estimate."""
    w = build_w_continuous(est, dims, variant)
    return hadamard(w, oslash(est.xhat_ext, est.xhat))


def build_f_continuous_scalar(est: Estimate) -> np.ndarray:
    """Closed-form smooth coefficient row for ``k = 2, n = 1``.

    Raises
    ------
    SingularStateError
        On a zero estimate entry, or when the exponential factor
        overflows (large negative ratio of the two entries).
    """
    if est.xhat.size != 2 or est.xhat_ext.size != 1:
        raise DimensionError(
            "scalar variant is defined for k=2, n=1 estimates only")
    x1, x2 = float(est.xhat[0]), float(est.xhat[1])
    ext = float(est.xhat_ext[0])
    if x1 == 0.0 or x2 == 0.0:
        raise SingularStateError("scalar variant: estimate has a zero entry")
    try:
        e = math.exp(-x2 / x1)
    except OverflowError as exc:
        raise SingularStateError(
            f"scalar variant: exponential overflow at ratio {x2 / x1:.3e}"
        ) from exc
    return np.array([[ext * e / x1, ext * (1.0 - e) / x2]])


def build_f_discontinuous(est: Estimate, dims: SystemDims,
                          variant: DiscontinuousSdc) -> tuple[np.ndarray, SdcInfo]:
    """Smallest-entry coefficient matrix.

    The column of the smallest-magnitude estimate entry carries
    ``gains[i] * xhat_ext[i]`` directly (the quotient cancels
    analytically, so a zero there is harmless); remaining columns share
    the complementary mass. Ties on the smallest entry break toward the
    lowest index and are reported in the returned :class:`SdcInfo`.

    Raises
    ------
    SingularStateError
        If a zero entry appears outside the concentrated column while the
        extension is nonzero; no finite coefficient matrix exists there.
    """
    _check_estimate(est, dims)
    kn = dims.state_dim
    if kn < 2:
        raise DimensionError("discontinuous variant needs k*n >= 2")
    xh = est.xhat
    ext = est.xhat_ext
    absx = np.abs(xh)
    j_star = int(np.argmin(absx))
    info = SdcInfo(tie=int(np.count_nonzero(absx == absx[j_star])) > 1)
    x_star = xh[j_star]
    gains = _row_gains(variant.gains, dims.n, "discontinuous")

    others = np.arange(kn) != j_star
    zero_cols = (xh == 0.0) & others
    if np.any(zero_cols) and np.any(ext != 0.0):
        raise SingularStateError(
            "discontinuous variant: zero entry outside the concentrated "
            "column with nonzero extension")

    f = np.empty((dims.n, kn))
    f[:, j_star] = gains * ext
    mass = 1.0 - gains * x_star
    if variant.weights is None:
        denom = np.where(zero_cols | ~others, 1.0, xh)
        f_others = np.outer(mass * ext / (kn - 1), 1.0 / denom)
        f[:, others] = f_others[:, others]
    else:
        inv_sums = np.zeros(dims.n)
        for j in range(kn):
            if j == j_star:
                continue
            for i in range(dims.n):
                wij = float(variant.weights(i, j, j_star))
                if wij == 0.0:
                    raise ConfigError("discontinuous weights must be nonzero")
                inv_sums[i] += 1.0 / wij
                f[i, j] = 0.0 if zero_cols[j] else mass[i] * ext[i] / (wij * xh[j])
        if np.any(np.abs(inv_sums - 1.0) > 1e-9):
            raise ConfigError(
                "discontinuous weights: reciprocals must sum to one per row "
                f"(got {inv_sums})")
    f[:, zero_cols] = 0.0
    return f, info


def build_f_hat(est: Estimate, dims: SystemDims,
                variant: SdcVariant) -> tuple[np.ndarray, SdcInfo]:
    """Dispatch to the variant's builder; returns the matrix and build info."""
    if isinstance(variant, ContinuousSdc):
        return build_f_continuous(est, dims, variant), SdcInfo()
    if isinstance(variant, ContinuousScalarSdc):
        if (dims.k, dims.n) != (2, 1):
            raise DimensionError(
                f"scalar variant requires k=2, n=1, got k={dims.k}, n={dims.n}")
        return build_f_continuous_scalar(est), SdcInfo()
    if isinstance(variant, DiscontinuousSdc):
        return build_f_discontinuous(est, dims, variant)
    raise ConfigError(f"unknown SDC variant: {variant!r}")


def assemble(f_hat, g_hat, dims: SystemDims) -> SdcFactorization:
    """Companion-form system matrices around a coefficient pair.

    ``A`` shifts derivative blocks upward and carries ``f_hat`` in its
    bottom block row; ``B`` injects ``g_hat`` into the last block. A
    singular ``g_hat`` is accepted here (construction is total); it
    surfaces in :func:`controllability_check` instead.
    """
    f = as_matrix(f_hat, "f_hat")
    g = as_matrix(g_hat, "g_hat")
    kn, n = dims.state_dim, dims.n
    if f.shape != (n, kn):
        raise DimensionError(f"assemble: f_hat must be {(n, kn)}, got {f.shape}")
    if g.shape != (n, n):
        raise DimensionError(f"assemble: g_hat must be {(n, n)}, got {g.shape}")
    a = np.zeros((kn, kn))
    if kn > n:
        a[: kn - n, n:] = np.eye(kn - n)
    a[kn - n:] = f
    b = np.zeros((kn, n))
    b[kn - n:] = g
    return SdcFactorization(a_hat=a, b_hat=b, f_hat=f, g_hat=g)


def controllability_check(fact: SdcFactorization, tol: float = RANK_RTOL) -> bool:
    """Kalman rank test on the factorization pair."""
    a, b = fact.a_hat, fact.b_hat
    kn = a.shape[0]
    blocks = [b]
    for _ in range(kn - 1):
        blocks.append(a @ blocks[-1])
    return rank(np.hstack(blocks), tol) == kn
