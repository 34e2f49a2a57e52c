"""Three-branch switching stabilizer.

The control law has one state-aware branch and two safety nets:

* inside the certified attraction region, a pointwise Riccati gain is
  solved against the SDC factorization of the current estimate (the
  estimate-driven analogue of an LQR along the trajectory);
* outside it, the extension estimate is cancelled outright and a fixed
  chain-integrator LQR gain takes over (active disturbance rejection);
* before the observer has settled, a constant startup input is applied.

Membership in the attraction region is decided through the sign of the
derivative of a quadratic Lyapunov candidate built once, offline, from
the plant's linearization at the origin (:func:`roa_from_linearization`).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, DimensionError, SingularMatrixError,
                     SingularStateError, SolverError)
from .matops import as_matrix, as_vector, solve_linear
from .riccati import (CareProblem, CareSolution, is_hurwitz,
                      is_positive_definite, solve_care, solve_lyapunov)
from .sdc import (ContinuousScalarSdc, ContinuousSdc, DiscontinuousSdc,
                  Estimate, SdcFactorization, SdcVariant, SystemDims,
                  assemble, build_f_hat)

log = logging.getLogger(__name__)

# Below this magnitude an estimate entry counts as singular for the
# smooth SDC variants and triggers the configured fallback.
SINGULAR_STATE_TOL = 1e-9


class Mode(enum.IntEnum):
    """Active control branch; the integer values appear in trajectory logs."""

    STARTUP = 0
    SDRE_ESO = 1
    ADRC = 2


class Law(enum.Enum):
    """Which branches the supervisor is allowed to use."""

    SWITCHING = "switching"
    SDRE_ESO_ONLY = "sdre_eso_only"
    ADRC_ONLY = "adrc_only"


@dataclass(frozen=True)
class RoaData:
    """Attraction-region certificate: Lyapunov matrix ``p`` and the
    closed-loop origin Jacobian ``j_cl0`` it was derived from."""

    p: np.ndarray
    j_cl0: np.ndarray


@dataclass(frozen=True)
class ControlDecision:
    """One controller evaluation: input, branch, and diagnostics."""

    u: np.ndarray
    mode: Mode
    k_used: np.ndarray | None = None
    roa_value: float | None = None
    fallback: bool = False
    tie: bool = False


@dataclass(frozen=True)
class ControllerConfig:
    """Static controller parameters shared by every evaluation."""

    dims: SystemDims
    q: np.ndarray
    r: np.ndarray
    variant: SdcVariant
    law: Law = Law.SWITCHING
    tau: float = 0.0
    u0: np.ndarray | None = None
    roa: RoaData | None = None
    dwell_steps: int = 0
    singular_fallback: bool = True
    max_switches: int = 100

    def __post_init__(self):
        kn, n = self.dims.state_dim, self.dims.n
        q = as_matrix(self.q, "q")
        r = as_matrix(self.r, "r")
        if q.shape != (kn, kn):
            raise ConfigError(f"controller: q must be {(kn, kn)}, got {q.shape}")
        if r.shape != (n, n):
            raise ConfigError(f"controller: r must be {(n, n)}, got {r.shape}")
        if self.tau < 0:
            raise ConfigError(f"controller: tau must be >= 0, got {self.tau}")
        if self.dwell_steps < 0:
            raise ConfigError("controller: dwell_steps must be >= 0")
        u0 = (np.zeros(n) if self.u0 is None
              else as_vector(self.u0, "u0"))
        if u0.size != n:
            raise ConfigError(f"controller: u0 must have size {n}, got {u0.size}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "u0", u0)


def chain_integrator_pair(dims: SystemDims) -> tuple[np.ndarray, np.ndarray]:
    """Nominal cascade ``(A0, B0)``: pure integrator chain with unit gain."""
    fact = assemble(np.zeros((dims.n, dims.state_dim)), np.eye(dims.n), dims)
    return fact.a_hat, fact.b_hat


def adrc_gain(dims: SystemDims, q, r) -> np.ndarray:
    """LQR gain on the nominal integrator chain; the fixed outer-branch gain."""
    a0, b0 = chain_integrator_pair(dims)
    return solve_care(CareProblem(a0, b0, q, r)).k


def roa_from_linearization(df0, b0, q, r, *, feedback_sign: int = -1,
                           margin: float = 1e-6) -> RoaData:
    """Attraction-region certificate from the origin linearization.

    Builds the companion Jacobian around the drift linearization ``df0``
    (shape ``(n, k n)``), closes the loop with the Riccati gain for the
    true input matrix ``b0`` (shape ``(k n, n)``), and extracts a
    Lyapunov matrix for the closed loop.

    Parameters
    ----------
    feedback_sign : int
        Sign applied to the gain term when forming the closed-loop
        Jacobian. The stabilizing closed loop uses ``-1`` (the default);
        ``+1`` is accepted for diagnostic comparison and fails the
        Hurwitz certificate on any plant whose open loop is unstable.
    margin : float
        Right-hand side weight of the Lyapunov equation defining ``p``.

    Raises
    ------
    SolverError
        If the closed-loop Jacobian is not Hurwitz or the Lyapunov
        solution is not positive definite.
    """
    df = as_matrix(df0, "df0")
    b = as_matrix(b0, "b0")
    n, kn = df.shape
    if kn % n != 0:
        raise DimensionError(
            f"roa: df0 width {kn} is not a multiple of its height {n}")
    if b.shape != (kn, n):
        raise DimensionError(f"roa: b0 must be {(kn, n)}, got {b.shape}")
    if feedback_sign not in (-1, 1):
        raise ConfigError(f"roa: feedback_sign must be -1 or +1, got {feedback_sign}")
    if not margin > 0:
        raise ConfigError(f"roa: margin must be positive, got {margin}")
    j0 = np.zeros((kn, kn))
    if kn > n:
        j0[: kn - n, n:] = np.eye(kn - n)
    j0[kn - n:] = df
    p_in = solve_care(CareProblem(j0, b, as_matrix(q, "q"), as_matrix(r, "r"))).p
    j_cl = j0 + feedback_sign * (b @ solve_linear(as_matrix(r, "r"), b.T @ p_in))
    if not is_hurwitz(j_cl):
        raise SolverError(
            f"roa: closed-loop origin Jacobian is not Hurwitz "
            f"(feedback_sign={feedback_sign:+d})")
    p = solve_lyapunov(j_cl, margin * np.eye(kn))
    if not is_positive_definite(p):
        raise SolverError("roa: Lyapunov certificate is not positive definite")
    return RoaData(p=p, j_cl0=j_cl)


class SwitchingController:
    """Stateful controller instance for one closed-loop run.

    Holds the fixed outer gain, the warm-start cache for the pointwise
    Riccati solves, and diagnostic counters. Decisions themselves are a
    pure function of ``(estimate, t, config)``: the warm start only
    accelerates convergence to the same gain, so replaying a logged
    estimate sequence on a fresh instance reproduces identical modes.
    """

    def __init__(self, cfg: ControllerConfig, g_hat, k_out=None):
        self.cfg = cfg
        self.g_hat = g_hat
        if k_out is None:
            k_out = adrc_gain(cfg.dims, cfg.q, cfg.r)
        else:
            k_out = as_matrix(k_out, "k_out")
            if k_out.shape != (cfg.dims.n, cfg.dims.state_dim):
                raise ConfigError(
                    f"controller: k_out must be "
                    f"{(cfg.dims.n, cfg.dims.state_dim)}, got {k_out.shape}")
        self.k_out = k_out
        self.law = cfg.law
        if cfg.law is Law.SWITCHING and cfg.roa is None:
            log.warning(
                "switching law requested without an attraction-region "
                "certificate; degrading to the outer branch only")
            self.law = Law.ADRC_ONLY
        self._warm: np.ndarray | None = None
        self._held_mode: Mode | None = None
        self._dwell = 0
        self.tie_count = 0
        self.fallback_count = 0

    # -- branch implementations ------------------------------------------

    def u_out(self, est: Estimate, roa_value: float | None = None,
              fallback: bool = False) -> ControlDecision:
        """Outer branch: cancel the extension estimate, apply the fixed
        chain-integrator gain."""
        g = np.asarray(self.g_hat(est.xhat), dtype=float)
        u = -solve_linear(g, self.k_out @ est.xhat + est.xhat_ext)
        return ControlDecision(u=u, mode=Mode.ADRC, k_used=self.k_out,
                               roa_value=roa_value, fallback=fallback)

    def u_in(self, est: Estimate) -> ControlDecision:
        """Inner branch: pointwise Riccati gain on the SDC factorization."""
        sol, _, tie, fb = self._sdre(est)
        return ControlDecision(u=-(sol.k @ est.xhat), mode=Mode.SDRE_ESO,
                               k_used=sol.k, tie=tie, fallback=fb)

    def roa_contains(self, est: Estimate) -> tuple[bool, float]:
        """Membership test for the attraction region.

        Evaluates the derivative of the Lyapunov candidate along the
        estimated closed-loop drift; strictly negative means inside.
        """
        if self.cfg.roa is None:
            raise ConfigError("roa_contains: no attraction-region certificate")
        sol, fact, _, _ = self._sdre(est)
        return self._membership(est, sol.k, fact.b_hat)

    def switch(self, est: Estimate, t: float) -> ControlDecision:
        """Full three-branch law at time ``t`` (dwell filter included)."""
        decision = self._switch_raw(est, t)
        if self.cfg.dwell_steps > 0:
            if (self._held_mode is not None and self._dwell > 0
                    and decision.mode != self._held_mode):
                decision = self._apply_mode(self._held_mode, est, t)
                self._dwell -= 1
            elif decision.mode != self._held_mode:
                self._held_mode = decision.mode
                self._dwell = self.cfg.dwell_steps
            else:
                self._dwell = max(0, self._dwell - 1)
        self.tie_count += int(decision.tie)
        self.fallback_count += int(decision.fallback)
        return decision

    # -- internals ---------------------------------------------------------

    def _switch_raw(self, est: Estimate, t: float) -> ControlDecision:
        if t < self.cfg.tau:
            return ControlDecision(u=self.cfg.u0.copy(), mode=Mode.STARTUP)
        if self.law is Law.ADRC_ONLY:
            return self.u_out(est)
        if self.law is Law.SDRE_ESO_ONLY:
            try:
                return self.u_in(est)
            except (SingularMatrixError, SolverError) as exc:
                log.debug("inner branch failed (%s); falling back", exc)
                return self.u_out(est, fallback=True)
        try:
            sol, fact, tie, fb = self._sdre(est)
            inside, v = self._membership(est, sol.k, fact.b_hat)
        except (SingularMatrixError, SolverError) as exc:
            log.debug("membership evaluation failed (%s); falling back", exc)
            return self.u_out(est, fallback=True)
        if inside:
            return ControlDecision(u=-(sol.k @ est.xhat), mode=Mode.SDRE_ESO,
                                   k_used=sol.k, roa_value=v, tie=tie,
                                   fallback=fb)
        return self.u_out(est, roa_value=v)

    def _apply_mode(self, mode: Mode, est: Estimate, t: float) -> ControlDecision:
        if mode is Mode.STARTUP:
            return ControlDecision(u=self.cfg.u0.copy(), mode=Mode.STARTUP)
        if mode is Mode.SDRE_ESO:
            try:
                return self.u_in(est)
            except (SingularMatrixError, SolverError):
                return self.u_out(est, fallback=True)
        return self.u_out(est)

    def _sdre(self, est: Estimate) -> tuple[CareSolution, "SdcFactorization", bool, bool]:
        """Factorize at the estimate and solve the pointwise Riccati problem.

        Returns the Riccati solution, the factorization, the tie flag of
        the build, and whether the variant fallback engaged.
        """
        cfg = self.cfg
        variant: SdcVariant = cfg.variant
        fallback = False
        smooth = isinstance(variant, (ContinuousSdc, ContinuousScalarSdc))
        if smooth and float(np.min(np.abs(est.xhat))) < SINGULAR_STATE_TOL:
            if not cfg.singular_fallback:
                raise SingularStateError(
                    "estimate within singular tolerance of the smooth variant")
            variant = DiscontinuousSdc()
            fallback = True
        try:
            f_hat, info = build_f_hat(est, cfg.dims, variant)
        except SingularStateError:
            if fallback or not (smooth and cfg.singular_fallback):
                raise
            f_hat, info = build_f_hat(est, cfg.dims, DiscontinuousSdc())
            fallback = True
        if not np.all(np.isfinite(f_hat)):
            raise SingularStateError("SDC coefficients are not finite")
        fact = assemble(f_hat, self.g_hat(est.xhat), cfg.dims)
        prob = CareProblem(fact.a_hat, fact.b_hat, cfg.q, cfg.r)
        sol = self._solve_warm(prob)
        return sol, fact, info.tie, fallback

    def _solve_warm(self, prob: CareProblem) -> CareSolution:
        if self._warm is not None:
            try:
                sol = solve_care(prob, k0=self._warm)
            except SolverError:
                sol = solve_care(prob)
        else:
            sol = solve_care(prob)
        self._warm = sol.k
        return sol

    def _membership(self, est: Estimate, k_in: np.ndarray,
                    b_hat: np.ndarray) -> tuple[bool, float]:
        n = self.cfg.dims.n
        drift = np.concatenate([est.xhat[n:], est.xhat_ext])
        closed = drift - b_hat @ (k_in @ est.xhat)
        v = float(est.xhat @ (self.cfg.roa.p @ closed))
        return v < 0.0, v
