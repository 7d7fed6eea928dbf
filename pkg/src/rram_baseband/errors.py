"""Exception hierarchy shared by every module."""


class RramBasebandError(Exception):
    """Base class for all simulator errors."""


class OddLengthError(RramBasebandError, ValueError):
    """A stacked real vector does not have an even length."""


class ShapeMismatchError(RramBasebandError, ValueError):
    pass


class BadLengthError(RramBasebandError, ValueError):
    pass


class ModeMismatchError(RramBasebandError, ValueError):
    pass


class UnsupportedSizeError(RramBasebandError, ValueError):
    pass


class EmptyInputError(RramBasebandError, ValueError):
    pass


class NotConvergedError(RramBasebandError):
    """Write-with-verify ran out of pulse budget.

    The device keeps its last conductance; ``state`` and ``report`` carry it.
    """

    def __init__(self, message, state=None, report=None):
        super().__init__(message)
        self.state = state
        self.report = report


class ProgrammingFailure(RramBasebandError):
    """One or more crossbar cells failed to converge under write-with-verify."""

    def __init__(self, message, failed_cells=0):
        super().__init__(message)
        self.failed_cells = failed_cells


class SingularSystemError(RramBasebandError, ArithmeticError):
    pass


class NoConvergenceError(RramBasebandError):
    """The analog relaxation did not settle within the step budget."""

    def __init__(self, message, iterations=0, residual=float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class EmptyLedgerError(RramBasebandError, ValueError):
    pass


class InsufficientDataError(RramBasebandError, ValueError):
    pass


class ConfigError(RramBasebandError, ValueError):
    pass


class IoError(RramBasebandError, OSError):
    pass
