"""Error hierarchy shared by every module.

Shape and option mistakes are caught with ``assert``; everything that depends on the
data itself raises one of these.
"""


class AnomcastError(Exception):
    """Base class of all data and numerical errors raised by anomcast."""


class EmptySeriesError(AnomcastError):
    """A series has fewer points than the operation needs."""


class DomainError(AnomcastError):
    """A value lies outside the domain of an operation (e.g. a non-positive price)."""


class SymbolMismatchError(AnomcastError):
    """Two series that must describe the same ticker do not."""


class NotATradingDayError(AnomcastError, KeyError):
    """A date is not present in the trading calendar derived from the price rows."""


class _Located(AnomcastError):
    def __init__(self, message, path=None, line=None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else "{0}:{1}".format(self.path, line)
            where += ": "
        super().__init__(where + message)


class ParseError(_Located):
    """A file row could not be parsed. ``line`` is 1-based and counts the header."""


class ValidationError(_Located):
    """A file row parsed but violates a value constraint."""


class ConfigError(AnomcastError):
    """The experiment configuration is malformed."""


class DegenerateInputError(AnomcastError):
    """The data carries no variation to estimate from (zero variance)."""


class NonConvergenceError(AnomcastError):
    """The optimiser did not converge. ``best`` holds the best model found so far."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InsufficientHistoryError(AnomcastError):
    """Not enough past observations for the lags of a model."""


class OrderSelectionError(AnomcastError):
    """Every candidate order failed. ``failures`` maps order -> error message."""

    def __init__(self, message, failures=None):
        self.failures = dict(failures or {})
        detail = "; ".join("{0}: {1}".format(k, v) for k, v in self.failures.items())
        super().__init__(message + (" (" + detail + ")" if detail else ""))


class TrainingError(AnomcastError):
    """Training hit a non-finite loss or gradient. ``trace`` holds the losses so far."""

    def __init__(self, message, trace=None, diagnostics=None):
        super().__init__(message)
        self.trace = list(trace or [])
        self.diagnostics = dict(diagnostics or {})
