"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument is outside the domain accepted by an operation."""


class InvalidStateError(ValueError):
    """A state cannot be used as given (e.g. zero norm)."""


class ResourceLimitError(RuntimeError):
    """A dense representation would exceed the supported size."""


class InvisibleObservableError(ValueError):
    """The observable cannot be estimated from the measurement ensemble."""


class InvalidOracleError(ValueError):
    """A probability oracle returned inconsistent values."""


class DegenerateDiagnosticError(ValueError):
    """A diagnostic ratio has a vanishing denominator."""


class TrainingFailedError(RuntimeError):
    """Every training restart diverged.

    The per-restart histories are kept on ``histories`` for inspection.
    """

    def __init__(self, message, histories=()):
        super().__init__(message)
        self.histories = list(histories)
