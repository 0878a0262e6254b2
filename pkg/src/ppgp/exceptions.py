"""Exception hierarchy shared by the library and the command line."""


class PPGPError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InputError(PPGPError, ValueError):
    """Malformed or inconsistent user input."""

    exit_code = 3


class DataError(InputError):
    """Event data that does not fit the configured domain or format."""

    exit_code = 3


class NumericalError(PPGPError, ArithmeticError):
    """Base class for failures of the numerical core."""

    exit_code = 4


class ConditioningError(NumericalError):
    """A covariance matrix could not be factorized even with maximal jitter."""


class RangeError(NumericalError):
    """An exponential overflowed while evaluating moments."""


class SelectionError(NumericalError):
    """Inducing point selection hit its iteration cap.

    The partial trace is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SamplerError(NumericalError):
    """The MCMC sampler could not make progress.

    Any draws collected before the failure are attached as ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
