"""Exception hierarchy shared by the library and the command-line tool.

Each error carries the CLI exit code it maps to, so ``mlstc`` can translate
failures without a lookup table.
"""


class MLSTCError(Exception):
    exit_code = 1


class ConfigError(MLSTCError, ValueError):
    exit_code = 2


class DataError(MLSTCError, ValueError):
    exit_code = 3


class FormatError(DataError):
    """A dataset or model file does not follow its declared layout."""


class TruncationError(FormatError):
    pass


class InsufficientDataError(DataError):
    pass


class DegenerateDataError(DataError):
    pass


class NumericalError(MLSTCError, ArithmeticError):
    exit_code = 4


class DomainError(NumericalError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class InfeasibleRateError(NumericalError, ValueError):
    pass


class SingularMatrixError(NumericalError):
    pass
