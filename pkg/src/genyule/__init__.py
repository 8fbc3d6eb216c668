"""Generalized Yule macroevolution models.

Closed-form laws built on Mittag-Leffler-type special functions, exact
samplers for the underlying point processes, and a Monte Carlo harness
cross-validating simulation against the analytic forms.
"""

from . import analytic, montecarlo, processes, samplers, specfun
from .errors import (
    ConvergenceError,
    GenYuleError,
    NumericsError,
    ParameterError,
    PoleError,
    PrecisionLossError,
    RateTableExhaustedError,
    SeriesOverflowError,
)
from .processes import (
    Constant,
    CriticalBD,
    Linear,
    ModelParams,
    NonlinearDistinct,
    SystemSnapshot,
)
from .samplers import RngStream

__version__ = "0.1.0"

__all__ = [
    "analytic",
    "montecarlo",
    "processes",
    "samplers",
    "specfun",
    "GenYuleError",
    "ParameterError",
    "PoleError",
    "NumericsError",
    "ConvergenceError",
    "PrecisionLossError",
    "SeriesOverflowError",
    "RateTableExhaustedError",
    "Linear",
    "Constant",
    "NonlinearDistinct",
    "CriticalBD",
    "ModelParams",
    "SystemSnapshot",
    "RngStream",
    "__version__",
]
