"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI uses when it escapes.
"""


class BGMoEError(Exception):
    exit_code = 1


class UsageError(BGMoEError):
    exit_code = 2


class DataError(BGMoEError, ValueError):
    """Bad input data: missing columns, non-positive responses, bad cells."""

    exit_code = 3


class DomainError(BGMoEError, ValueError):
    """Arguments outside the support of the distribution."""

    exit_code = 3


class ParameterError(BGMoEError, ValueError):
    """Invalid distribution or model parameters."""

    exit_code = 3


class NumericalError(BGMoEError, ArithmeticError):
    """Quadrature or optimisation failed to reach the requested accuracy.

    ``estimate`` and ``error_bound`` carry the last iterate when available.
    """

    exit_code = 4

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class FittingError(NumericalError):
    """EM fitting failed (all restarts, or a cell of the E-step)."""

    def __init__(self, message, diagnostics=None, cell=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
        self.cell = cell


class MonotonicityError(FittingError):
    """Log-likelihood decreased by more than the allowed slack."""


class SerializationError(BGMoEError):
    exit_code = 3


class VersionError(SerializationError):
    pass


class ChecksumError(SerializationError):
    pass
