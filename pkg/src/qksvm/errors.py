"""Exception types shared across the package."""


class QksvmError(Exception):
    """Base class for every error raised by this library."""


class ConfigurationError(QksvmError):
    """A configuration value is invalid (qubit cap, bad family name, malformed config file)."""


class UsageError(QksvmError):
    """An operation was called with arguments that violate its contract."""


class IngestionError(QksvmError):
    """Dataset file missing, a mapped column absent, or no usable rows."""


class ConvergenceError(QksvmError):
    """Solver exhausted its iteration budget.  Carries the best iterate found."""

    def __init__(self, message: str, model=None):
        super().__init__(message)
        self.model = model


class DegenerateDataError(QksvmError):
    """Training data cannot produce a model (e.g. a single class)."""


class DegenerateModelError(QksvmError):
    """A trained model lacks the structure an operation needs (e.g. no support vectors)."""
