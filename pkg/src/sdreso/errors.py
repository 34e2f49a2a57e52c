"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit 1,
simulation divergence exits 2, solver failures exit 3.
"""


class SdresoError(Exception):
    """Base class for all package errors."""


class DimensionError(SdresoError, ValueError):
    """Operands or configuration fields have incompatible shapes."""


class EvaluationError(SdresoError, ValueError):
    """A user-supplied function returned a non-finite or misshapen value."""


class SingularMatrixError(SdresoError, ArithmeticError):
    """A linear solve or elementwise division hit a (near-)zero pivot."""


class SingularStateError(SingularMatrixError):
    """An estimate sits on a singular set of the requested SDC variant."""


class SolverError(SdresoError, RuntimeError):
    """An iterative solver failed: no stabilizing start, divergence, or a
    certificate (positive definiteness, Hurwitz) could not be established."""


class ConfigError(SdresoError, ValueError):
    """A scenario file or configuration object failed validation."""


class DivergenceError(SdresoError, RuntimeError):
    """A simulated trajectory left the admissible region or went non-finite."""
