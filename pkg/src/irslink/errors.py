"""Error types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when a function receives malformed numerical input."""


class InvalidConfigError(ValueError):
    """Raised for inconsistent or unparseable scenario configuration."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative routine exhausts its iteration budget.

    Carries the last iterate so callers can inspect or reuse it.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
