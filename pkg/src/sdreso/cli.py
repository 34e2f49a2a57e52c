"""Command-line front end.

Subcommands::

    run          simulate one scenario (optionally a randomized x0 sweep)
    compare      switching / inner-only / outer-gain family on the same start
    validate     parse and check a scenario file, run nothing
    list-plants  show the available plant kinds and their parameters

Exit codes: 0 success, 1 configuration error, 2 trajectory divergence,
3 solver failure. ``--scenario`` takes a path, or the bare name of a
bundled scenario such as ``pendulum_sec4``.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from importlib import resources

import numpy as np

from .controller import SwitchingController, adrc_gain
from .errors import (ConfigError, DimensionError, DivergenceError,
                     EvaluationError, SingularMatrixError, SolverError)
from .report import (build_summary, save_compare_figure, save_run_figure,
                     summarize_run, summary_text, write_csv)
from .scenario import MODES, PLANT_KINDS, Scenario, materialize, parse_scenario
from .sim import run

DEFAULT_OUT = "sdreso_out"


@dataclasses.dataclass(frozen=True)
class _Task:
    """One closed-loop run: label, controller mode, optional overrides."""

    label: str
    mode: str
    k_out: np.ndarray | None = None
    x0: np.ndarray | None = None
    family: bool = False


def _execute(task: _Task, scenario: Scenario, out_dir: str, figures: bool):
    """Worker body: materialize, simulate, write this run's own files."""
    setup = materialize(scenario, mode=task.mode)
    sim_cfg = setup.sim
    if task.x0 is not None:
        sim_cfg = dataclasses.replace(sim_cfg, x0=task.x0)
    controller = SwitchingController(sim_cfg.controller, setup.plant.g_hat,
                                     k_out=task.k_out)
    t0 = time.perf_counter()
    try:
        log = run(setup.plant, sim_cfg, controller)
    except DivergenceError as exc:
        raise DivergenceError(f"run '{task.label}': {exc}") from None
    wall = time.perf_counter() - t0
    write_csv(log, os.path.join(out_dir, task.label + ".csv"))
    if figures:
        save_run_figure(log, os.path.join(out_dir, task.label + ".png"),
                        title=task.label)
    report = summarize_run(task.label, task.mode, log, wall,
                           family=task.family)
    return report, log.t, log.j, log.x[:, 0]


def _run_tasks(tasks, scenario, out_dir, figures, workers):
    body = partial(_execute, scenario=scenario, out_dir=out_dir,
                   figures=figures)
    if workers <= 1 or len(tasks) <= 1:
        return [body(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(body, tasks))


def _load(args) -> Scenario:
    path = args.scenario
    if path is None:
        raise ConfigError("missing --scenario")
    if not os.path.exists(path) and os.sep not in str(path):
        bundled = resources.files("sdreso") / "scenarios" / f"{path}.scn"
        if bundled.is_file():
            with resources.as_file(bundled) as real:
                return parse_scenario(real)
    return parse_scenario(path)


def _out_dir(args, scenario: Scenario) -> str:
    out = args.out or scenario.out_dir or DEFAULT_OUT
    os.makedirs(out, exist_ok=True)
    return out


def _perturbed_starts(x0: np.ndarray, count: int) -> list[np.ndarray]:
    """Randomized initial conditions: each component moves by up to 5%
    of its own magnitude; seed i drives start i, so sweeps reproduce."""
    starts = []
    for seed in range(count):
        rng = np.random.default_rng(seed)
        delta = rng.uniform(-0.05, 0.05, size=x0.size) * np.abs(x0)
        starts.append(x0 + delta)
    return starts


def _finish(results, out_dir: str) -> None:
    summary = build_summary([r[0] for r in results])
    text = summary_text(summary)
    with open(os.path.join(out_dir, "summary.txt"), "w",
              encoding="ascii") as fh:
        fh.write(text)
    print(text, end="")


def cmd_run(args) -> int:
    scenario = _load(args)
    mode = args.mode or scenario.mode
    out_dir = _out_dir(args, scenario)
    if args.seed_sweep:
        starts = _perturbed_starts(np.asarray(scenario.x0, dtype=float),
                                   args.seed_sweep)
        tasks = [_Task(label=f"{scenario.name}_{mode}_seed{i}", mode=mode,
                       x0=s0) for i, s0 in enumerate(starts)]
    else:
        tasks = [_Task(label=f"{scenario.name}_{mode}", mode=mode)]
    results = _run_tasks(tasks, scenario, out_dir, not args.no_figures,
                         args.workers)
    _finish(results, out_dir)
    return 0


def cmd_compare(args) -> int:
    scenario = _load(args)
    if not scenario.sweep_q_scales and not scenario.sweep_gains:
        raise ConfigError(
            "compare: scenario has no [sweep] section (q_scales or gains)")
    out_dir = _out_dir(args, scenario)
    dims = scenario.dims

    tasks = [
        _Task(label=f"{scenario.name}_switching", mode="switching"),
        _Task(label=f"{scenario.name}_sdre", mode="sdre"),
    ]
    for scale in scenario.sweep_q_scales:
        k_out = adrc_gain(dims, scale * scenario.q, scenario.r)
        tasks.append(_Task(label=f"{scenario.name}_adrc_q{scale:g}",
                           mode="adrc", k_out=k_out, family=True))
    for i, gain in enumerate(scenario.sweep_gains):
        k_out = np.asarray(gain, dtype=float).reshape(dims.n, dims.state_dim)
        tasks.append(_Task(label=f"{scenario.name}_adrc_g{i}", mode="adrc",
                           k_out=k_out, family=True))

    results = _run_tasks(tasks, scenario, out_dir, not args.no_figures,
                         args.workers)
    if not args.no_figures:
        curves = [(rep.name, t, j, x1) for rep, t, j, x1 in results]
        save_compare_figure(curves[:2], curves[2:],
                            os.path.join(out_dir,
                                         f"{scenario.name}_compare.png"),
                            title=scenario.name)
    _finish(results, out_dir)
    return 0


def cmd_validate(args) -> int:
    scenario = _load(args)
    print(f"ok: scenario '{scenario.name}' "
          f"(plant={scenario.plant_kind}, mode={scenario.mode}, "
          f"variant={scenario.variant}, dt={scenario.dt:g}, "
          f"epsilon={scenario.epsilon:g})")
    return 0


def cmd_list_plants(args) -> int:
    rows = {
        "pendulum": "k=2 n=1; parameters: gravity (9.81), length (2.5), "
                    "damping (10)",
        "chain_integrator": "k, n set in the scenario; pure integrator "
                            "cascade with unit gain",
    }
    for kind in PLANT_KINDS:
        print(f"{kind:<18} {rows[kind]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdreso",
        description="Closed-loop stabilizer studies: simulate, compare, "
                    "report.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed_sweep=False):
        p.add_argument("--scenario", required=True,
                       help="scenario file path or bundled name")
        p.add_argument("--out", default=None,
                       help=f"output directory (default {DEFAULT_OUT})")
        p.add_argument("--mode", choices=MODES, default=None,
                       help="override the scenario's controller mode")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel runs for sweeps (default 1)")
        p.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering, write CSVs only")
        if seed_sweep:
            p.add_argument("--seed-sweep", type=int, default=0,
                           metavar="COUNT",
                           help="run COUNT randomized initial conditions")

    p_run = sub.add_parser("run", help="simulate one scenario")
    add_common(p_run, seed_sweep=True)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare",
                           help="cost comparison across controller families")
    add_common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate", help="parse a scenario, run nothing")
    p_val.add_argument("--scenario", required=True)
    p_val.set_defaults(func=cmd_validate)

    p_lp = sub.add_parser("list-plants", help="show available plant kinds")
    p_lp.set_defaults(func=cmd_list_plants)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DimensionError, EvaluationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 2
    except (SolverError, SingularMatrixError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
