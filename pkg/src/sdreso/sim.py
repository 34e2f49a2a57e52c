"""Closed-loop simulation harness.

Plant and observer are integrated as one stacked ODE with a fixed-step
classical Runge-Kutta scheme; the controller is evaluated once per step
and its output held constant across the step. The running quadratic cost
is accumulated by the trapezoidal rule on the same grid the log uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .controller import ControllerConfig, SwitchingController
from .errors import ConfigError, DimensionError, DivergenceError, EvaluationError
from .eso import EsoConfig, EsoState, _derivative_arrays
from .matops import as_vector
from .sdc import Estimate, SystemDims

# A trajectory whose plant state leaves this ball is declared divergent.
DIVERGENCE_LIMIT = 1e6

# Default integration step; scenarios may override within the observer's
# bandwidth constraint dt <= epsilon / 10.
DEFAULT_DT = 1e-4
DEFAULT_T_FINAL = 10.0

StateFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Plant:
    """Simulated system in companion form.

    ``f`` and ``g`` are the true drift and input gain (reality); ``g_hat``
    is the controller-visible gain estimate. ``df0`` and ``b0`` optionally
    carry the origin linearization of the drift's bottom row and the true
    input matrix at the origin, used to certify the attraction region.
    """

    name: str
    dims: SystemDims
    f: StateFn
    g: StateFn
    g_hat: StateFn
    df0: np.ndarray | None = None
    b0: np.ndarray | None = None


def pendulum_plant(gravity: float = 9.81, length: float = 2.5,
                   damping: float = 10.0) -> Plant:
    """Damped inverted pendulum on a massless rod.

    State is (angle from upright, angular rate); the input enters through
    ``cos(angle)/length``, of which only the sign is assumed known.
    """
    if not length > 0:
        raise ConfigError(f"pendulum: length must be positive, got {length}")
    if not gravity > 0:
        raise ConfigError(f"pendulum: gravity must be positive, got {gravity}")
    a = gravity / length

    def f(x):
        return np.array([a * math.sin(x[0]) - damping * x[1]])

    def g(x):
        return np.array([[math.cos(x[0]) / length]])

    def g_hat(x):
        return np.array([[float(np.sign(math.cos(x[0])))]])

    return Plant(
        name="pendulum",
        dims=SystemDims(k=2, n=1),
        f=f, g=g, g_hat=g_hat,
        df0=np.array([[a, -damping]]),
        b0=np.array([[0.0], [1.0 / length]]),
    )


def chain_integrator_plant(dims: SystemDims) -> Plant:
    """Pure integrator chain with unit input gain; the nominal cascade."""
    n, kn = dims.n, dims.state_dim
    eye = np.eye(n)
    b0 = np.zeros((kn, n))
    b0[kn - n:] = eye
    return Plant(
        name="chain_integrator",
        dims=dims,
        f=lambda x: np.zeros(n),
        g=lambda x: eye,
        g_hat=lambda x: eye,
        df0=np.zeros((n, kn)),
        b0=b0,
    )


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], state: np.ndarray,
             t: float, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step.

    Raises
    ------
    DivergenceError
        If the new state is non-finite (the derivative blew up inside
        the step). The offending state is included in the message.
    """
    k1 = f(t, state)
    k2 = f(t + 0.5 * dt, state + (0.5 * dt) * k1)
    k3 = f(t + 0.5 * dt, state + (0.5 * dt) * k2)
    k4 = f(t + dt, state + dt * k3)
    new = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise DivergenceError(
            f"rk4_step: non-finite state after step at t={t:.6g} "
            f"(state was {np.array2string(state, precision=4)})")
    return new


@dataclass(frozen=True)
class SimConfig:
    """Everything one closed-loop run needs besides the plant."""

    x0: np.ndarray
    eso: EsoConfig
    eso_init: EsoState
    controller: ControllerConfig
    t_final: float = DEFAULT_T_FINAL
    dt: float = DEFAULT_DT

    def __post_init__(self):
        object.__setattr__(self, "x0", as_vector(self.x0, "x0"))
        if not self.dt > 0:
            raise ConfigError(f"sim: dt must be positive, got {self.dt}")
        if not self.t_final >= self.dt:
            raise ConfigError(
                f"sim: t_final {self.t_final} shorter than one step {self.dt}")
        eps = self.eso.min_epsilon()
        if eps is not None and self.dt > eps / 10.0 * (1.0 + 1e-12):
            raise ConfigError(
                f"sim: dt={self.dt:g} exceeds epsilon/10={eps / 10.0:g}; the "
                f"observer injection would be under-resolved")
        steps = round(self.t_final / self.dt)
        if abs(steps * self.dt - self.t_final) > 1e-6 * self.dt:
            raise ConfigError(
                f"sim: t_final={self.t_final!r} is not a whole number of "
                f"steps of dt={self.dt!r}")


@dataclass
class TrajectoryLog:
    """Per-step record of one run plus aggregate diagnostics.

    ``j`` is the accumulated running cost up to each sample; ``mode``
    holds the integer branch codes. ``gamma`` is the peak of
    ``|x| + |u|`` over the run (Euclidean norms), a boundedness witness.
    """

    dims: SystemDims
    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    xhat_ext: np.ndarray
    u: np.ndarray
    mode: np.ndarray
    j: np.ndarray
    tie_count: int = 0
    fallback_count: int = 0
    gamma: float = 0.0

    @property
    def switch_steps(self) -> np.ndarray:
        """Indices where the active branch changed from the previous step."""
        return np.nonzero(np.diff(self.mode) != 0)[0] + 1

    @property
    def switch_count(self) -> int:
        return int(self.switch_steps.size)

    def final_state_norm(self) -> float:
        return float(np.linalg.norm(self.x[-1]))


def run(plant: Plant, cfg: SimConfig,
        controller: SwitchingController | None = None) -> TrajectoryLog:
    """Simulate the closed loop for ``t_final`` seconds.

    A controller instance may be supplied (sweeps reuse this to install
    an externally designed outer gain); by default one is built from
    ``cfg.controller`` and the plant's gain estimate.

    Raises
    ------
    DivergenceError
        If the stacked plant/observer state norm exceeds
        ``DIVERGENCE_LIMIT`` or the integrator produced non-finite values;
        the partial log up to the failing step is attached as the
        exception's ``partial_log``.
    """
    dims = plant.dims
    if cfg.controller.dims != dims or cfg.eso.dims != dims:
        raise ConfigError(
            f"run: dims mismatch between plant {dims}, controller "
            f"{cfg.controller.dims}, observer {cfg.eso.dims}")
    kn, n = dims.state_dim, dims.n
    x0 = cfg.x0
    if x0.size != kn:
        raise ConfigError(f"run: x0 must have size {kn}, got {x0.size}")
    _probe_plant(plant, x0)

    if controller is None:
        controller = SwitchingController(cfg.controller, plant.g_hat)
    nsteps = round(cfg.t_final / cfg.dt)
    dt = cfg.dt

    t_log = np.empty(nsteps + 1)
    x_log = np.empty((nsteps + 1, kn))
    xh_log = np.empty((nsteps + 1, kn))
    xe_log = np.empty((nsteps + 1, n))
    u_log = np.empty((nsteps + 1, n))
    mode_log = np.empty(nsteps + 1, dtype=np.int64)
    j_log = np.empty(nsteps + 1)

    q, r = cfg.controller.q, cfg.controller.r
    field = _stacked_field(plant, cfg.eso, kn, n)
    z = np.concatenate([x0, cfg.eso_init.xhat, cfg.eso_init.xhat_ext])
    cost = 0.0
    gamma = 0.0

    for i in range(nsteps + 1):
        t = i * dt
        x = z[:kn]
        est = Estimate(xhat=z[kn:2 * kn], xhat_ext=z[2 * kn:], t=t)
        decision = controller.switch(est, t)
        u = decision.u

        t_log[i] = t
        x_log[i] = x
        xh_log[i] = est.xhat
        xe_log[i] = est.xhat_ext
        u_log[i] = u
        mode_log[i] = int(decision.mode)
        j_log[i] = cost
        gamma = max(gamma, float(np.linalg.norm(x)) + float(np.linalg.norm(u)))
        if i == nsteps:
            break

        ell0 = 0.5 * (x @ q @ x + u @ r @ u)
        try:
            z = rk4_step(lambda tt, zz: field(tt, zz, u), z, t, dt)
        except DivergenceError as exc:
            raise _with_partial(exc, dims, i + 1, t_log, x_log, xh_log,
                                xe_log, u_log, mode_log, j_log, controller,
                                gamma)
        x = z[:kn]
        if float(np.max(np.abs(z))) > DIVERGENCE_LIMIT:
            exc = DivergenceError(
                f"run: closed-loop state left the admissible ball at "
                f"t={t + dt:.6g} (|x|_inf > {DIVERGENCE_LIMIT:g})")
            raise _with_partial(exc, dims, i + 1, t_log, x_log, xh_log,
                                xe_log, u_log, mode_log, j_log, controller,
                                gamma)
        ell1 = 0.5 * (x @ q @ x + u @ r @ u)
        cost += 0.5 * dt * (ell0 + ell1)

    return TrajectoryLog(
        dims=dims, t=t_log, x=x_log, xhat=xh_log, xhat_ext=xe_log,
        u=u_log, mode=mode_log, j=j_log,
        tie_count=controller.tie_count,
        fallback_count=controller.fallback_count,
        gamma=gamma,
    )


def _stacked_field(plant: Plant, eso_cfg: EsoConfig, kn: int, n: int):
    """Combined plant + observer vector field; ``u`` is held by the caller."""

    def field(t, z, u):
        x = z[:kn]
        dx = np.empty(kn)
        if kn > n:
            dx[: kn - n] = x[n:]
        dx[kn - n:] = plant.f(x) + plant.g(x) @ u
        dxh, dxe = _derivative_arrays(z[kn:2 * kn], z[2 * kn:], x[:n], u,
                                      eso_cfg)
        return np.concatenate([dx, dxh, dxe])

    return field


def _probe_plant(plant: Plant, x0: np.ndarray) -> None:
    """Fail fast on misshapen plant callables."""
    n = plant.dims.n
    fx = np.asarray(plant.f(x0), dtype=float)
    if fx.shape != (n,):
        raise EvaluationError(
            f"plant.f returned shape {fx.shape}, expected {(n,)}")
    for label, fn in (("g", plant.g), ("g_hat", plant.g_hat)):
        m = np.asarray(fn(x0), dtype=float)
        if m.shape != (n, n):
            raise EvaluationError(
                f"plant.{label} returned shape {m.shape}, expected {(n, n)}")


def _with_partial(exc: DivergenceError, dims, rows, t_log, x_log, xh_log,
                  xe_log, u_log, mode_log, j_log, controller,
                  gamma) -> DivergenceError:
    exc.partial_log = TrajectoryLog(
        dims=dims, t=t_log[:rows].copy(), x=x_log[:rows].copy(),
        xhat=xh_log[:rows].copy(), xhat_ext=xe_log[:rows].copy(),
        u=u_log[:rows].copy(), mode=mode_log[:rows].copy(),
        j=j_log[:rows].copy(), tie_count=controller.tie_count,
        fallback_count=controller.fallback_count, gamma=gamma)
    return exc
