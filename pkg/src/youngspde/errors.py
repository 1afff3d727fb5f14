"""Exception hierarchy.

Every error carries a machine-readable ``category`` and the process exit
code the CLI maps it to (0 ok, 2 config, 3 numerical divergence, 4 IO).
"""


class LabError(Exception):
    category = "error"
    exit_code = 1


class ConfigError(LabError, ValueError):
    category = "config"
    exit_code = 2


class GridMismatchError(LabError, ValueError):
    category = "grid-mismatch"
    exit_code = 2


class DegenerateGridError(LabError, ValueError):
    category = "degenerate-grid"
    exit_code = 2


class TruncationMismatchError(LabError, ValueError):
    category = "truncation-mismatch"
    exit_code = 2


class AliasingError(LabError, ValueError):
    category = "aliasing"
    exit_code = 2


class SingularModeError(LabError, ValueError):
    category = "singular-mode"
    exit_code = 2


class PreconditionError(LabError, ValueError):
    category = "precondition"
    exit_code = 2


class FactorizationError(LabError, ArithmeticError):
    category = "factorization"
    exit_code = 3


class DivergenceError(LabError, ArithmeticError):
    category = "divergence"
    exit_code = 3

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SewingDivergenceError(DivergenceError):
    category = "sewing-divergence"


class WindowDivergenceError(DivergenceError):
    category = "window-divergence"


class NonFiniteError(DivergenceError):
    category = "non-finite"


class LabIOError(LabError, OSError):
    category = "io"
    exit_code = 4
