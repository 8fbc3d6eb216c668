"""Exception hierarchy shared across the package.

Two broad families matter to callers: parameter problems (bad inputs,
rejected before any computation) and numerical problems (a computation
that cannot reach the requested accuracy or range).  The CLI maps them
to distinct exit codes.
"""


class GenYuleError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(GenYuleError, ValueError):
    """An argument is outside the supported domain."""


class PoleError(ParameterError):
    """Gamma function evaluated at a non-positive integer."""


class NumericsError(GenYuleError, ArithmeticError):
    """A numerical evaluation could not meet its accuracy contract."""


class ConvergenceError(NumericsError):
    """Series did not converge within the allowed number of terms."""


class PrecisionLossError(NumericsError):
    """Cancellation or range exceeds the configured working-precision budget."""


class SeriesOverflowError(NumericsError):
    """A positive-argument evaluation exceeds the configured growth cap."""


class RateTableExhaustedError(GenYuleError, RuntimeError):
    """A birth-process simulation outgrew its finite rate table."""
