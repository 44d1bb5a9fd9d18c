"""Exception types shared across the package."""


class WeakSeqError(Exception):
    """Base class for all package errors."""


class ConfigurationError(WeakSeqError, ValueError):
    """Invalid parameters or configuration."""


class ContractError(WeakSeqError, ValueError):
    """A precondition on an operation's inputs was violated."""


class ConsistencyError(WeakSeqError, RuntimeError):
    """An internal numerical consistency check failed."""


class InsufficientDataError(WeakSeqError, ValueError):
    """Not enough samples to form the requested estimate."""


class FitError(WeakSeqError, RuntimeError):
    """A nonlinear fit did not converge.

    ``diagnostics`` carries whatever the optimizer reported.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoiseFloorError(WeakSeqError, ValueError):
    """Reference spectral peaks are not resolved above the noise floor."""
