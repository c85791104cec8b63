"""Exception types shared across the package.

The CLI maps :class:`DataError` subclasses to exit status 2 and
:class:`NumericalError` subclasses to exit status 3.
"""


class R2kmError(Exception):
    pass


class DataError(R2kmError, ValueError):
    """Bad input data, configuration or parameters."""


class DimensionError(DataError):
    pass


class ParameterError(DataError):
    pass


class CodecError(DataError):
    pass


class ProtocolError(DataError):
    """A split request the dataset cannot satisfy."""


class NumericalError(R2kmError, ArithmeticError):
    pass


class SingularSystemError(NumericalError):
    pass


class DegenerateLabelsError(NumericalError):
    pass


class DegenerateStatisticError(NumericalError):
    pass


class TuningError(NumericalError):
    """Every grid combination failed."""
