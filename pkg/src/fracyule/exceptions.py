"""Exception types raised by fracyule."""


class FypError(Exception):
    """Base class for all fracyule errors."""


class DomainError(FypError, ValueError):
    """An argument lies outside the domain of the function."""


class MLOverflowError(FypError, OverflowError):
    """The true value exceeds the floating point range."""


class CancellationError(FypError, ArithmeticError):
    """An alternating sum lost too many significant digits to be trusted."""

    def __init__(self, message, digits_lost=None):
        super().__init__(message)
        self.digits_lost = digits_lost


class SeriesDivergenceError(CancellationError):
    """A series failed to converge within the allowed number of terms."""


class EstimationError(FypError):
    """Base class for method-of-moments failures."""


class NoRootError(EstimationError):
    """The estimating equation has no sign change on the bracket."""

    def __init__(self, message, residual_low=None, residual_high=None):
        super().__init__(message)
        self.residual_low = residual_low
        self.residual_high = residual_high


class DegenerateDataError(EstimationError, ValueError):
    """The data carry no spread (e.g. all durations equal)."""


class KappaTooLargeError(EstimationError):
    """A fractional moment order is not below the fitted index."""
