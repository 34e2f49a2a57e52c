"""Extended state observer.

Reconstructs the full derivative chain of each measured channel plus one
extension block that converges to the value of the unknown drift (model
error and input-gain mismatch included). Only the first block of the
plant state is measured; everything downstream of the observer consumes
estimates exclusively.

The linear high-gain parametrization places all observer poles at
``-1/epsilon``; its injection gains grow like ``1/epsilon^i`` per block,
which is why the simulator refuses steps larger than ``epsilon / 10``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionError, EvaluationError
from .matops import as_vector
from .sdc import SystemDims

GainFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LinearHighGain:
    """Injection ``e_i(v) = c_i * v / epsilon**i``.

    ``coefficients`` has one entry per observer block (``k + 1`` total);
    when omitted it defaults to the binomial row that places every pole
    at ``-1/epsilon``.
    """

    epsilon: float
    coefficients: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"eso: epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class CustomGains:
    """Arbitrary per-block injection functions, one per observer block."""

    functions: tuple[GainFn, ...]


EsoGains = LinearHighGain | CustomGains


@dataclass(frozen=True)
class EsoConfig:
    dims: SystemDims
    gains: EsoGains
    g_hat: Callable[[np.ndarray], np.ndarray]
    g_input: str = "estimate"
    # per-block linear injection factors c_i / epsilon**i, precomputed
    scaled: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.g_input not in ("estimate", "measurement"):
            raise ConfigError(
                f"eso: g_input must be 'estimate' or 'measurement', "
                f"got {self.g_input!r}")
        k = self.dims.k
        if isinstance(self.gains, LinearHighGain):
            coeffs = self.gains.coefficients
            if coeffs is None:
                coeffs = tuple(math.comb(k + 1, i) for i in range(1, k + 2))
            if len(coeffs) != k + 1:
                raise ConfigError(
                    f"eso: need {k + 1} injection coefficients, got {len(coeffs)}")
            eps = self.gains.epsilon
            scaled = np.array([c / eps ** i
                               for i, c in enumerate(coeffs, start=1)])
            object.__setattr__(self, "scaled", scaled)
        elif isinstance(self.gains, CustomGains):
            if len(self.gains.functions) != k + 1:
                raise ConfigError(
                    f"eso: need {k + 1} injection functions, "
                    f"got {len(self.gains.functions)}")
        else:
            raise ConfigError(f"eso: unknown gain parametrization {self.gains!r}")

    def min_epsilon(self) -> float | None:
        """Bandwidth parameter if the gains are linear, else None."""
        return self.gains.epsilon if isinstance(self.gains, LinearHighGain) else None


@dataclass(frozen=True)
class EsoState:
    """Observer state: stacked estimate plus extension block."""

    xhat: np.ndarray
    xhat_ext: np.ndarray


def initialize(x0_guess, ext_guess, dims: SystemDims) -> EsoState:
    """Construct an observer state, checking block dimensions."""
    xh = as_vector(x0_guess, "x0_guess")
    xe = as_vector(ext_guess, "ext_guess")
    if xh.size != dims.state_dim:
        raise DimensionError(
            f"eso: initial estimate has size {xh.size}, "
            f"expected {dims.state_dim}")
    if xe.size != dims.n:
        raise DimensionError(
            f"eso: initial extension has size {xe.size}, expected {dims.n}")
    return EsoState(xhat=xh, xhat_ext=xe)


def eso_derivative(state: EsoState, y, u, cfg: EsoConfig) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative of the observer state.

    Parameters
    ----------
    state : EsoState
    y : array_like, shape (n,)
        Measured first block of the plant state.
    u : array_like, shape (n,)
        Control currently applied to the plant.
    cfg : EsoConfig

    Returns
    -------
    (dxhat, dxhat_ext)
        Derivatives of the stacked estimate and of the extension block.
    """
    yv = as_vector(y, "y")
    uv = as_vector(u, "u")
    n = cfg.dims.n
    if yv.size != n or uv.size != n:
        raise DimensionError(
            f"eso: y and u must have size {n}, got {yv.size} and {uv.size}")
    return _derivative_arrays(state.xhat, state.xhat_ext, yv, uv, cfg)


def _derivative_arrays(xhat: np.ndarray, ext: np.ndarray, y: np.ndarray,
                       u: np.ndarray, cfg: EsoConfig) -> tuple[np.ndarray, np.ndarray]:
    """Hot-path core of :func:`eso_derivative`; inputs are trusted arrays."""
    dims = cfg.dims
    k, n = dims.k, dims.n
    err = y - xhat[:n]
    if cfg.scaled is not None:
        inj = cfg.scaled[:, None] * err
    else:
        rows = []
        for i, fn in enumerate(cfg.gains.functions):
            v = np.asarray(fn(err), dtype=float)
            if v.shape != (n,):
                raise EvaluationError(
                    f"eso: injection function {i} returned shape {v.shape}, "
                    f"expected {(n,)}")
            rows.append(v)
        inj = np.vstack(rows)
    dxhat = np.concatenate([xhat[n:], ext]) + inj[:k].ravel()
    g_arg = xhat if cfg.g_input == "estimate" else np.concatenate([y, xhat[n:]])
    g = np.asarray(cfg.g_hat(g_arg), dtype=float)
    if g.shape != (n, n):
        raise EvaluationError(
            f"eso: g_hat returned shape {g.shape}, expected {(n, n)}")
    dxhat[(k - 1) * n:] += g @ u
    return dxhat, inj[k].copy()
