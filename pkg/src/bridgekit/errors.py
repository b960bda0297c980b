"""Exception hierarchy.

Two families matter to callers: :class:`InputError` (malformed or
inconsistent input, CLI exit code 2) and :class:`ComputationError`
(a well-formed problem the solvers cannot handle, CLI exit code 3).
"""


class BridgeError(Exception):
    """Base class for every error raised by bridgekit."""


class InputError(BridgeError, ValueError):
    pass


class ComputationError(BridgeError, ArithmeticError):
    pass


class NegativeEntry(InputError):
    pass


class NotNormalized(InputError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class DimensionMismatch(InputError):
    pass


class HorizonMismatch(InputError):
    pass


class NonPositiveTemperature(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IrrationalMarginals(InputError):
    pass


class ZeroEntry(ComputationError):
    pass


class NonPositiveKernel(ComputationError):
    pass


class NotConverged(ComputationError):
    def __init__(self, message, last_distance=None):
        super().__init__(message)
        self.last_distance = last_distance


class MaxIterationsExceeded(NotConverged):
    pass


class InfeasibleSupport(ComputationError):
    pass


class NoFeasiblePath(ComputationError):
    pass


class NotPrimitive(ComputationError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class EnumerationBudgetExceeded(ComputationError):
    pass


class BudgetExceeded(ComputationError):
    pass


class OracleScaleExceeded(ComputationError):
    pass
