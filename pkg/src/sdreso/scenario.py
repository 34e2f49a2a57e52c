"""Scenario files: parse, validate, serialize, and materialize runs.

Grammar (plain text, one statement per line)::

    # comment (also allowed after a value)
    [section]
    key = value

Sections and keys:

``[scenario]``
    ``name``            run identifier, used in output file names

``[plant]``
    ``kind``            ``pendulum`` or ``chain_integrator``
    pendulum:  ``gravity``, ``length``, ``damping`` (scalars, optional)
    chain_integrator: ``k``, ``n`` (positive integers)

``[controller]``
    ``mode``            ``switching`` | ``sdre`` | ``adrc``
    ``variant``         ``continuous`` | ``continuous_scalar`` | ``discontinuous``
    ``q``, ``r``        weight matrices
    ``sharpness``       continuous-variant exponent scale (optional)
    ``channel_gains``   per-channel factors for the variant (optional)
    ``tau``             startup hold time, seconds (default 0)
    ``u0``              startup input vector (default zeros)
    ``max_switches``    chattering detector bound (default 100)
    ``dwell_steps``     minimum steps between mode changes (default 0)
    ``roa_df0``         origin drift Jacobian rows for the attraction
                        region (default: the plant's own)
    ``roa_b0``          origin input matrix for the attraction region

``[observer]``
    ``epsilon``         high-gain bandwidth parameter
    ``coefficients``    per-block injection coefficients (optional)
    ``g_input``         ``estimate`` | ``measurement`` (default estimate)
    ``xhat0``           initial state estimate
    ``ext0``            initial extension estimate

``[simulation]``
    ``x0``              initial plant state
    ``t_final``, ``dt`` horizon and fixed step, seconds

``[sweep]`` (optional; used by ``compare``)
    ``q_scales``        list of Q scalings for the outer-gain family
    ``gains``           explicit outer gains, one per ``;``-separated row
                        (mutually exclusive with ``q_scales``)

``[output]`` (optional)
    ``dir``             default output directory

Values are numbers in decimal or scientific notation. Vectors separate
components with commas; matrices separate rows with ``;`` and entries
with commas or whitespace. Any number may carry a ``deg`` or ``rad``
suffix; ``deg`` converts to radians on input (rates in deg/s convert the
same way). Serialization always writes radians, so
``parse_text(serialize(s)) == s`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .controller import ControllerConfig, Law, RoaData, roa_from_linearization
from .errors import ConfigError, DimensionError
from .eso import EsoConfig, EsoState, LinearHighGain, initialize
from .sdc import (ContinuousScalarSdc, ContinuousSdc, DiscontinuousSdc,
                  SdcVariant, SystemDims)
from .sim import Plant, SimConfig, chain_integrator_plant, pendulum_plant

MODES = ("switching", "sdre", "adrc")
VARIANTS = ("continuous", "continuous_scalar", "discontinuous")
PLANT_KINDS = ("pendulum", "chain_integrator")

_LAW_BY_MODE = {
    "switching": Law.SWITCHING,
    "sdre": Law.SDRE_ESO_ONLY,
    "adrc": Law.ADRC_ONLY,
}

_PLANT_PARAM_KEYS = {
    "pendulum": ("gravity", "length", "damping"),
    "chain_integrator": ("k", "n"),
}


@dataclass(eq=False)
class Scenario:
    """One fully specified study: plant, controller, observer, run shape.

    Array-valued fields make the generated ``__eq__`` unusable, so
    equality is field-by-field with exact array comparison; serialization
    uses shortest round-trip float formatting to keep
    ``parse_text(serialize(s)) == s``.
    """

    name: str
    plant_kind: str
    plant_params: tuple[tuple[str, float], ...]
    mode: str
    variant: str
    q: np.ndarray
    r: np.ndarray
    x0: np.ndarray
    xhat0: np.ndarray
    ext0: np.ndarray
    epsilon: float
    t_final: float
    dt: float
    sharpness: float | None = None
    channel_gains: tuple[float, ...] | None = None
    tau: float = 0.0
    u0: np.ndarray | None = None
    max_switches: int = 100
    dwell_steps: int = 0
    roa_df0: np.ndarray | None = None
    roa_b0: np.ndarray | None = None
    coefficients: tuple[float, ...] | None = None
    g_input: str = "estimate"
    sweep_q_scales: tuple[float, ...] = ()
    sweep_gains: tuple[np.ndarray, ...] = ()
    out_dir: str | None = None

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if a is None or b is None:
                    if (a is None) != (b is None):
                        return False
                elif not (np.shape(a) == np.shape(b) and np.array_equal(a, b)):
                    return False
            elif f.name == "sweep_gains":
                if len(a) != len(b) or any(
                        not np.array_equal(ga, gb) for ga, gb in zip(a, b)):
                    return False
            elif a != b:
                return False
        return True

    @property
    def dims(self) -> SystemDims:
        params = dict(self.plant_params)
        if self.plant_kind == "pendulum":
            return SystemDims(k=2, n=1)
        return SystemDims(k=int(params["k"]), n=int(params["n"]))


# -- low-level text handling -------------------------------------------------


@dataclass
class _Raw:
    value: str
    line: int
    used: bool = False


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def _read_sections(text: str, source: str) -> dict[str, dict[str, _Raw]]:
    known = ("scenario", "plant", "controller", "observer", "simulation",
             "sweep", "output")
    sections: dict[str, dict[str, _Raw]] = {}
    current: dict[str, _Raw] | None = None
    current_name = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(
                    f"{source}:{lineno}: malformed section header {line!r}")
            name = line[1:-1].strip().lower()
            if name not in known:
                raise ConfigError(
                    f"{source}:{lineno}: unknown section [{name}]; expected "
                    f"one of {', '.join(known)}")
            if name in sections:
                raise ConfigError(
                    f"{source}:{lineno}: duplicate section [{name}]")
            current = sections.setdefault(name, {})
            current_name = name
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(
                f"{source}:{lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in current:
            raise ConfigError(
                f"{source}:{lineno}: duplicate key '{key}' in "
                f"[{current_name}] (first at line {current[key].line})")
        current[key] = _Raw(value=value, line=lineno)
    return sections


def _parse_number(token: str, where: str) -> float:
    parts = token.split()
    unit = 1.0
    if len(parts) == 2 and parts[1].lower() in ("deg", "rad"):
        if parts[1].lower() == "deg":
            unit = math.pi / 180.0
        token = parts[0]
    elif len(parts) != 1:
        raise ConfigError(f"{where}: cannot parse number from {token!r}")
    try:
        return float(token) * unit
    except ValueError:
        raise ConfigError(f"{where}: cannot parse number from {token!r}") from None


class _Section:
    """Typed accessors over one parsed section, tracking key usage."""

    def __init__(self, name: str, entries: dict[str, _Raw], source: str):
        self.name = name
        self.entries = entries
        self.source = source

    def _where(self, key: str) -> str:
        raw = self.entries.get(key)
        line = f":{raw.line}" if raw is not None else ""
        return f"{self.source}{line}: [{self.name}] {key}"

    def _raw(self, key: str, default):
        raw = self.entries.get(key)
        if raw is None:
            if default is _REQUIRED:
                raise ConfigError(
                    f"{self.source}: missing required key '{key}' in "
                    f"[{self.name}]")
            return None
        raw.used = True
        return raw.value

    def line(self, key: str) -> int | None:
        raw = self.entries.get(key)
        return None if raw is None else raw.line

    def scalar(self, key: str, default=None) -> float | None:
        value = self._raw(key, default)
        if value is None:
            return default
        return _parse_number(value, self._where(key))

    def integer(self, key: str, default=None) -> int | None:
        value = self.scalar(key, default)
        if value is None:
            return None
        i = int(value)
        if i != value:
            raise ConfigError(f"{self._where(key)}: expected an integer")
        return i

    def string(self, key: str, default=None, choices=None) -> str | None:
        value = self._raw(key, default)
        if value is None:
            return default
        if choices is not None and value not in choices:
            raise ConfigError(
                f"{self._where(key)}: expected one of "
                f"{', '.join(choices)}; got {value!r}")
        return value

    def vector(self, key: str, default=None) -> np.ndarray | None:
        value = self._raw(key, default)
        if value is None:
            return default
        where = self._where(key)
        parts = [p.strip() for p in value.split(",")]
        if any(not p for p in parts):
            raise ConfigError(f"{where}: empty component")
        return np.array([_parse_number(p, where) for p in parts])

    def matrix(self, key: str, default=None) -> np.ndarray | None:
        value = self._raw(key, default)
        if value is None:
            return default
        where = self._where(key)
        rows = []
        for chunk in value.split(";"):
            parts = [p for p in chunk.replace(",", " ").split() if p]
            if not parts:
                raise ConfigError(f"{where}: empty matrix row")
            rows.append([_parse_number(p, where) for p in parts])
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ConfigError(f"{where}: ragged matrix rows")
        return np.array(rows)

    def unused(self) -> list[tuple[str, _Raw]]:
        return [(k, r) for k, r in self.entries.items() if not r.used]


class _REQUIRED:
    pass


def _section(sections, name, source) -> _Section:
    return _Section(name, sections.get(name, {}), source)


# -- parsing ------------------------------------------------------------------


def parse_text(text: str, source: str = "<scenario>") -> Scenario:
    """Parse scenario text; every diagnostic carries ``source:line``."""
    sections = _read_sections(text, source)

    scn = _section(sections, "scenario", source)
    name = scn.string("name", _REQUIRED)

    plant = _section(sections, "plant", source)
    kind = plant.string("kind", _REQUIRED, choices=PLANT_KINDS)
    params = []
    if kind == "pendulum":
        for key, default in (("gravity", 9.81), ("length", 2.5),
                             ("damping", 10.0)):
            value = plant.scalar(key, default)
            params.append((key, float(value)))
    else:
        for key in ("k", "n"):
            params.append((key, float(plant.integer(key, _REQUIRED))))

    ctl = _section(sections, "controller", source)
    mode = ctl.string("mode", "switching", choices=MODES)
    variant = ctl.string("variant", "discontinuous", choices=VARIANTS)
    q = ctl.matrix("q", _REQUIRED)
    r = ctl.matrix("r", _REQUIRED)
    sharpness = ctl.scalar("sharpness", None)
    gains_vec = ctl.vector("channel_gains", None)
    channel_gains = None if gains_vec is None else tuple(float(g) for g in gains_vec)
    tau = float(ctl.scalar("tau", 0.0))
    u0 = ctl.vector("u0", None)
    max_switches = ctl.integer("max_switches", 100)
    dwell_steps = ctl.integer("dwell_steps", 0)
    roa_df0 = ctl.matrix("roa_df0", None)
    roa_b0 = ctl.matrix("roa_b0", None)

    obs = _section(sections, "observer", source)
    epsilon = float(obs.scalar("epsilon", _REQUIRED))
    coeff_vec = obs.vector("coefficients", None)
    coefficients = None if coeff_vec is None else tuple(float(c) for c in coeff_vec)
    g_input = obs.string("g_input", "estimate",
                         choices=("estimate", "measurement"))
    xhat0 = obs.vector("xhat0", _REQUIRED)
    ext0 = obs.vector("ext0", _REQUIRED)

    sim = _section(sections, "simulation", source)
    x0 = sim.vector("x0", _REQUIRED)
    t_final = float(sim.scalar("t_final", _REQUIRED))
    dt = float(sim.scalar("dt", _REQUIRED))

    sweep = _section(sections, "sweep", source)
    scales_vec = sweep.vector("q_scales", None)
    sweep_q_scales = (() if scales_vec is None
                      else tuple(float(s) for s in scales_vec))
    gains_mat = sweep.matrix("gains", None)
    sweep_gains = (() if gains_mat is None
                   else tuple(np.array(row) for row in gains_mat))
    if sweep_q_scales and sweep_gains:
        raise ConfigError(
            f"{source}:{sweep.line('gains')}: [sweep] accepts q_scales or "
            f"gains, not both")

    out = _section(sections, "output", source)
    out_dir = out.string("dir", None)

    for sec in (scn, plant, ctl, obs, sim, sweep, out):
        for key, raw in sec.unused():
            raise ConfigError(
                f"{source}:{raw.line}: unknown key '{key}' in [{sec.name}]")

    scenario = Scenario(
        name=name, plant_kind=kind, plant_params=tuple(params),
        mode=mode, variant=variant, q=q, r=r,
        sharpness=sharpness, channel_gains=channel_gains,
        tau=tau, u0=u0, max_switches=max_switches, dwell_steps=dwell_steps,
        roa_df0=roa_df0, roa_b0=roa_b0,
        epsilon=epsilon, coefficients=coefficients, g_input=g_input,
        xhat0=xhat0, ext0=ext0, x0=x0, t_final=t_final, dt=dt,
        sweep_q_scales=sweep_q_scales, sweep_gains=sweep_gains,
        out_dir=out_dir,
    )
    _validate(scenario, source, {
        "dt": sim.line("dt"), "epsilon": obs.line("epsilon"),
        "q": ctl.line("q"), "r": ctl.line("r"),
        "x0": sim.line("x0"), "xhat0": obs.line("xhat0"),
        "ext0": obs.line("ext0"), "variant": ctl.line("variant"),
    })
    return scenario


def parse_scenario(path) -> Scenario:
    """Parse and validate a scenario file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_text(text, source=str(path))


def _validate(s: Scenario, source: str, lines: dict[str, int | None]) -> None:
    """Build every runtime config once so shape and range violations
    surface at parse time, mapped back to the offending key."""
    guesses = (
        ("dt", "dt"), ("epsilon", "epsilon"),
        ("q must", "q"), ("r must", "r"),
        ("x0", "x0"), ("initial estimate", "xhat0"),
        ("initial extension", "ext0"), ("variant", "variant"),
    )
    try:
        materialize(s)
    except (ConfigError, DimensionError) as exc:
        msg = str(exc)
        for needle, key in guesses:
            if needle in msg:
                line = lines.get(key)
                at = f":{line}" if line is not None else ""
                raise ConfigError(f"{source}{at}: {msg}") from None
        raise ConfigError(f"{source}: {msg}") from None


# -- materialization ----------------------------------------------------------


def build_plant(s: Scenario) -> Plant:
    params = dict(s.plant_params)
    if s.plant_kind == "pendulum":
        return pendulum_plant(gravity=params["gravity"],
                              length=params["length"],
                              damping=params["damping"])
    return chain_integrator_plant(SystemDims(k=int(params["k"]),
                                             n=int(params["n"])))


def build_variant(s: Scenario) -> SdcVariant:
    if s.variant == "continuous":
        return ContinuousSdc(sharpness=1.0 if s.sharpness is None else s.sharpness,
                             gains=s.channel_gains)
    if s.variant == "continuous_scalar":
        return ContinuousScalarSdc()
    return DiscontinuousSdc(gains=s.channel_gains)


@dataclass(frozen=True)
class RunSetup:
    """Materialized scenario: everything ``sim.run`` needs."""

    plant: Plant
    sim: SimConfig
    law: Law
    roa: RoaData | None = None


def materialize(s: Scenario, mode: str | None = None) -> RunSetup:
    """Resolve a scenario into plant + simulation config.

    ``mode`` overrides the scenario's controller mode (the CLI flag).
    """
    mode = s.mode if mode is None else mode
    if mode not in MODES:
        raise ConfigError(f"materialize: unknown mode {mode!r}")
    law = _LAW_BY_MODE[mode]
    plant = build_plant(s)
    dims = plant.dims
    x0 = np.asarray(s.x0, dtype=float)
    if x0.shape != (dims.state_dim,):
        raise ConfigError(
            f"materialize: x0 must have size {dims.state_dim} for "
            f"{plant.name}, got {x0.size}")
    variant = build_variant(s)

    roa = None
    if law is Law.SWITCHING:
        df0 = plant.df0 if s.roa_df0 is None else s.roa_df0
        b0 = plant.b0 if s.roa_b0 is None else s.roa_b0
        if df0 is None or b0 is None:
            raise ConfigError(
                "materialize: switching mode needs an origin linearization "
                "(roa_df0/roa_b0) and the plant does not provide one")
        roa = roa_from_linearization(df0, b0, s.q, s.r)

    controller = ControllerConfig(
        dims=dims, q=s.q, r=s.r, variant=variant, law=law,
        tau=s.tau, u0=s.u0, roa=roa, dwell_steps=s.dwell_steps,
        max_switches=s.max_switches,
    )
    eso = EsoConfig(dims=dims,
                    gains=LinearHighGain(epsilon=s.epsilon,
                                         coefficients=s.coefficients),
                    g_hat=plant.g_hat, g_input=s.g_input)
    eso_init = initialize(s.xhat0, s.ext0, dims)
    sim = SimConfig(x0=s.x0, eso=eso, eso_init=eso_init,
                    controller=controller, t_final=s.t_final, dt=s.dt)
    return RunSetup(plant=plant, sim=sim, law=law, roa=roa)


# -- serialization ------------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def _fmt_vector(vec: np.ndarray) -> str:
    return ", ".join(_fmt(v) for v in np.asarray(vec, dtype=float).ravel())


def _fmt_matrix(mat: np.ndarray) -> str:
    m = np.asarray(mat, dtype=float)
    if m.ndim == 1:
        m = m[None, :]
    return "; ".join(" ".join(_fmt(v) for v in row) for row in m)


def serialize(s: Scenario) -> str:
    """Canonical text form; parsing it back reproduces ``s`` exactly."""
    lines = ["[scenario]", f"name = {s.name}", "", "[plant]",
             f"kind = {s.plant_kind}"]
    for key, value in s.plant_params:
        if key in ("k", "n"):
            lines.append(f"{key} = {int(value)}")
        else:
            lines.append(f"{key} = {_fmt(value)}")

    lines += ["", "[controller]",
              f"mode = {s.mode}",
              f"variant = {s.variant}",
              f"q = {_fmt_matrix(s.q)}",
              f"r = {_fmt_matrix(s.r)}"]
    if s.sharpness is not None:
        lines.append(f"sharpness = {_fmt(s.sharpness)}")
    if s.channel_gains is not None:
        lines.append(f"channel_gains = {_fmt_vector(np.array(s.channel_gains))}")
    lines.append(f"tau = {_fmt(s.tau)}")
    if s.u0 is not None:
        lines.append(f"u0 = {_fmt_vector(s.u0)}")
    lines.append(f"max_switches = {s.max_switches}")
    lines.append(f"dwell_steps = {s.dwell_steps}")
    if s.roa_df0 is not None:
        lines.append(f"roa_df0 = {_fmt_matrix(s.roa_df0)}")
    if s.roa_b0 is not None:
        lines.append(f"roa_b0 = {_fmt_matrix(s.roa_b0)}")

    lines += ["", "[observer]", f"epsilon = {_fmt(s.epsilon)}"]
    if s.coefficients is not None:
        lines.append(f"coefficients = {_fmt_vector(np.array(s.coefficients))}")
    lines.append(f"g_input = {s.g_input}")
    lines.append(f"xhat0 = {_fmt_vector(s.xhat0)}")
    lines.append(f"ext0 = {_fmt_vector(s.ext0)}")

    lines += ["", "[simulation]",
              f"x0 = {_fmt_vector(s.x0)}",
              f"t_final = {_fmt(s.t_final)}",
              f"dt = {_fmt(s.dt)}"]

    if s.sweep_q_scales or s.sweep_gains:
        lines += ["", "[sweep]"]
        if s.sweep_q_scales:
            lines.append(
                f"q_scales = {_fmt_vector(np.array(s.sweep_q_scales))}")
        if s.sweep_gains:
            stacked = np.vstack([np.asarray(g, dtype=float).ravel()
                                 for g in s.sweep_gains])
            lines.append(f"gains = {_fmt_matrix(stacked)}")

    if s.out_dir is not None:
        lines += ["", "[output]", f"dir = {s.out_dir}"]
    return "\n".join(lines) + "\n"
