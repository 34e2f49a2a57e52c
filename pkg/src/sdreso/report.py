"""Run outputs: delimited time series, summary report, figures.

The time-series schema is fixed: one row per sample with columns
``t, x_1..x_{kn}, xhat_1..xhat_{kn}, xhat_ext_1..xhat_ext_n, u_1..u_n,
mode, J``, every float printed with 17 significant digits so repeated
runs diff byte-for-byte and downstream fits lose nothing to rounding.
``mode`` is the integer branch code (0 startup, 1 inner, 2 outer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sdc import SystemDims
from .sim import TrajectoryLog

FLOAT_FMT = "%.17g"


def csv_header(dims: SystemDims) -> str:
    kn, n = dims.state_dim, dims.n
    cols = (["t"]
            + [f"x_{i + 1}" for i in range(kn)]
            + [f"xhat_{i + 1}" for i in range(kn)]
            + [f"xhat_ext_{i + 1}" for i in range(n)]
            + [f"u_{i + 1}" for i in range(n)]
            + ["mode", "J"])
    return ",".join(cols)


def format_csv(log: TrajectoryLog) -> str:
    """Render a trajectory as CSV text (trailing newline included)."""
    rows = [csv_header(log.dims)]
    floats = np.hstack([log.t[:, None], log.x, log.xhat, log.xhat_ext, log.u])
    for i in range(floats.shape[0]):
        head = ",".join(FLOAT_FMT % v for v in floats[i])
        rows.append(f"{head},{int(log.mode[i]):d},{FLOAT_FMT % log.j[i]}")
    return "\n".join(rows) + "\n"


def write_csv(log: TrajectoryLog, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_csv(log))


# -- summaries -----------------------------------------------------------------


@dataclass(frozen=True)
class RunReport:
    """Aggregates of one completed run, taken straight off its log."""

    name: str
    mode: str
    final_state_norm: float
    final_j: float
    switch_count: int
    tie_count: int
    fallback_count: int
    max_u: float
    gamma: float
    wall_time: float
    family: bool = False


@dataclass(frozen=True)
class SummaryReport:
    """All runs of one invocation plus the sweep-family cost envelope."""

    runs: tuple[RunReport, ...]
    envelope: tuple[float, float] | None = None


def summarize_run(name: str, mode: str, log: TrajectoryLog,
                  wall_time: float, family: bool = False) -> RunReport:
    return RunReport(
        name=name, mode=mode,
        final_state_norm=log.final_state_norm(),
        final_j=float(log.j[-1]),
        switch_count=log.switch_count,
        tie_count=log.tie_count,
        fallback_count=log.fallback_count,
        max_u=float(np.max(np.linalg.norm(log.u, axis=1))),
        gamma=log.gamma,
        wall_time=wall_time,
        family=family,
    )


def build_summary(runs: list[RunReport]) -> SummaryReport:
    family = [r.final_j for r in runs if r.family]
    envelope = (min(family), max(family)) if family else None
    return SummaryReport(runs=tuple(runs), envelope=envelope)


def render_table(report: SummaryReport) -> str:
    header = (f"{'run':<34} {'mode':<10} {'final |x|':>12} {'final J':>12} "
              f"{'switches':>8} {'ties':>5} {'max |u|':>10} {'wall s':>8}")
    lines = [header, "-" * len(header)]
    for r in report.runs:
        lines.append(
            f"{r.name:<34} {r.mode:<10} {r.final_state_norm:>12.5g} "
            f"{r.final_j:>12.6g} {r.switch_count:>8d} {r.tie_count:>5d} "
            f"{r.max_u:>10.5g} {r.wall_time:>8.2f}")
    if report.envelope is not None:
        lo, hi = report.envelope
        lines.append(f"sweep-family cost envelope: [{lo:.6g}, {hi:.6g}]")
    return "\n".join(lines)


def render_kv(report: SummaryReport) -> str:
    """Machine-readable block: flat key = value lines."""
    lines = [f"runs = {len(report.runs)}"]
    for i, r in enumerate(report.runs):
        prefix = f"run.{i}"
        lines += [
            f"{prefix}.name = {r.name}",
            f"{prefix}.mode = {r.mode}",
            f"{prefix}.family = {int(r.family)}",
            f"{prefix}.final_state_norm = {FLOAT_FMT % r.final_state_norm}",
            f"{prefix}.final_j = {FLOAT_FMT % r.final_j}",
            f"{prefix}.switches = {r.switch_count}",
            f"{prefix}.ties = {r.tie_count}",
            f"{prefix}.fallbacks = {r.fallback_count}",
            f"{prefix}.max_u = {FLOAT_FMT % r.max_u}",
            f"{prefix}.gamma = {FLOAT_FMT % r.gamma}",
            f"{prefix}.wall_s = {r.wall_time:.3f}",
        ]
    if report.envelope is not None:
        lines.append(f"envelope.min_j = {FLOAT_FMT % report.envelope[0]}")
        lines.append(f"envelope.max_j = {FLOAT_FMT % report.envelope[1]}")
    return "\n".join(lines)


def summary_text(report: SummaryReport) -> str:
    return render_table(report) + "\n\n" + render_kv(report) + "\n"


# -- figures -------------------------------------------------------------------


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def save_run_figure(log: TrajectoryLog, path, title: str = "") -> None:
    """2x2 panel: states vs estimates, input, active branch, running cost."""
    plt = _pyplot()
    fig, axes = plt.subplots(2, 2, figsize=(11, 7), sharex=True)
    kn, n = log.dims.state_dim, log.dims.n

    ax = axes[0, 0]
    for i in range(kn):
        ax.plot(log.t, log.x[:, i], label=f"x{i + 1}")
        ax.plot(log.t, log.xhat[:, i], "--", label=f"xhat{i + 1}")
    ax.set_ylabel("state / estimate")
    ax.legend(fontsize=8, ncol=2)
    ax.grid(alpha=0.3)

    ax = axes[0, 1]
    for i in range(n):
        ax.plot(log.t, log.u[:, i], label=f"u{i + 1}")
    ax.set_ylabel("input")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)

    ax = axes[1, 0]
    ax.step(log.t, log.mode, where="post")
    ax.set_yticks([0, 1, 2])
    ax.set_yticklabels(["startup", "inner", "outer"])
    ax.set_xlabel("t [s]")
    ax.set_ylabel("branch")
    ax.grid(alpha=0.3)

    ax = axes[1, 1]
    ax.plot(log.t, log.j)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("running cost J")
    ax.grid(alpha=0.3)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_compare_figure(named_curves: list[tuple[str, np.ndarray, np.ndarray, np.ndarray]],
                        family_curves: list[tuple[str, np.ndarray, np.ndarray, np.ndarray]],
                        path, title: str = "") -> None:
    """Cost envelope plot: sweep family as a shaded band, named runs on top.

    Each curve is ``(label, t, running_cost, first_state_component)``.
    """
    plt = _pyplot()
    fig, (ax_j, ax_x) = plt.subplots(2, 1, figsize=(9, 7), sharex=True)

    if family_curves:
        t = family_curves[0][1]
        stack = np.vstack([j for _, _, j, _ in family_curves])
        ax_j.fill_between(t, stack.min(axis=0), stack.max(axis=0),
                          color="0.8", label="outer-gain family")
        for _, tf, j, x1 in family_curves:
            ax_j.plot(tf, j, color="0.6", lw=0.6)
            ax_x.plot(tf, x1, color="0.6", lw=0.6)
    for name, tn, j, x1 in named_curves:
        ax_j.plot(tn, j, lw=1.6, label=name)
        ax_x.plot(tn, x1, lw=1.6, label=name)

    ax_j.set_ylabel("running cost J")
    ax_j.legend(fontsize=8)
    ax_j.grid(alpha=0.3)
    ax_x.set_xlabel("t [s]")
    ax_x.set_ylabel("x1")
    ax_x.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
