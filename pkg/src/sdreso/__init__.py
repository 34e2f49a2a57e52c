"""Switching stabilizer toolkit.

Stabilizes systems of unknown drift by pairing a high-gain extended
state observer with pointwise Riccati gains on state-dependent
factorizations, falling back to disturbance-rejection control outside
the certified attraction region. Ships a simulation harness and a CLI
(``sdreso``) that writes trajectory CSVs, summaries, and figures.
"""

from .controller import (ControlDecision, ControllerConfig, Law, Mode,
                         RoaData, SwitchingController, adrc_gain,
                         chain_integrator_pair, roa_from_linearization)
from .errors import (ConfigError, DimensionError, DivergenceError,
                     EvaluationError, SdresoError, SingularMatrixError,
                     SingularStateError, SolverError)
from .eso import (CustomGains, EsoConfig, EsoState, LinearHighGain,
                  eso_derivative, initialize)
from .riccati import (CareProblem, CareSolution, bootstrap_stabilizing_gain,
                      is_hurwitz, is_positive_definite, solve_care,
                      solve_lyapunov)
from .sdc import (ContinuousScalarSdc, ContinuousSdc, DiscontinuousSdc,
                  Estimate, SdcFactorization, SdcVariant, SystemDims,
                  assemble, build_f_continuous, build_f_continuous_scalar,
                  build_f_discontinuous, build_f_hat, build_w_continuous,
                  controllability_check, diagonal_index_set)
from .report import (RunReport, SummaryReport, build_summary, csv_header,
                     format_csv, render_kv, render_table, summarize_run,
                     summary_text, write_csv)
from .scenario import (RunSetup, Scenario, build_plant, build_variant,
                       materialize, parse_scenario, parse_text, serialize)
from .sim import (Plant, SimConfig, TrajectoryLog, chain_integrator_plant,
                  pendulum_plant, rk4_step, run)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
