"""
Exception hierarchy

Every error carries the process exit code the CLI reports for it:
2 configuration, 3 model/feasibility, 4 numerical failure.
"""

from typing import Any, Optional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_NUMERICAL = 4


class CplNetError(Exception):
    """Base error with a detail message and an exit code"""

    exit_code: int = EXIT_MODEL

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


# ============================================================================
# CONFIGURATION ERRORS (exit 2)
# ============================================================================


class ConfigError(CplNetError):
    """Invalid run configuration, empty range or bad simulation parameters"""

    exit_code = EXIT_CONFIG


# ============================================================================
# MODEL ERRORS (exit 3)
# ============================================================================


class ModelError(CplNetError):
    """The circuit model cannot produce the requested quantity"""

    exit_code = EXIT_MODEL


class DomainError(ModelError):
    """Argument outside the mathematical domain of an operation"""


class InfeasibleOperatingPointError(ModelError):
    """No steady state with 0 < D < 1 and positive node voltages"""

    def __init__(self, detail: str, converter: int):
        super().__init__(f"converter {converter}: {detail}")
        self.converter = converter


class DimensionMismatchError(ModelError):
    """Spec, operating point, matrices or gains disagree in size"""


class UncontrollableError(ModelError):
    """Controllability matrix is rank deficient"""


class PolePlacementError(ModelError):
    """Requested closed-loop poles are rejected"""


class PreconditionError(ModelError):
    """An analysis precondition does not hold (e.g. unstable at R = 0)"""


class SingularBlockError(ModelError):
    """Leading block of a Schur-complement determinant is singular"""

    def __init__(self, block: str):
        super().__init__(f"block {block} is singular")
        self.block = block


class NotStabilizableError(ModelError):
    """No component value in the search bracket stabilizes every R"""

    def __init__(self, detail: str, worst_R: float, spectrum: Any):
        super().__init__(detail)
        self.worst_R = worst_R
        self.spectrum = spectrum


# ============================================================================
# NUMERICAL ERRORS (exit 4)
# ============================================================================


class NumericalError(CplNetError):
    """Iteration or integration failed"""

    exit_code = EXIT_NUMERICAL


class ConvergenceError(NumericalError):
    """Fixed-point iteration hit its cap"""

    def __init__(self, detail: str, residual: float):
        super().__init__(f"{detail} (final residual {residual:.3e})")
        self.residual = residual


class DivergenceError(NumericalError):
    """Simulated state left the divergence guard; carries the truncated trace"""

    def __init__(self, detail: str, trace: Any = None):
        super().__init__(detail)
        self.trace = trace
