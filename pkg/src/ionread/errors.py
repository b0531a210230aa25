"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the domain where the operation is defined."""


class DegenerateDataError(DomainError):
    """Input data cannot constrain the requested fit."""


class UnsupportedConfiguration(ValueError):
    """The requested backend cannot evaluate this configuration."""


class ConvergenceError(RuntimeError):
    """An iterative numerical method failed; ``diagnostics`` holds the details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
