"""Exception types shared across the toolkit."""


class TrajkitError(Exception):
    """Base class for all toolkit-specific failures."""


class StepSizeError(TrajkitError):
    """Raised when the per-step jump probability exceeds the validity bound."""

    def __init__(self, message, probability=None, time=None):
        super().__init__(message)
        self.probability = probability
        self.time = time


class JumpApplicationError(TrajkitError):
    """Raised when a jump operator annihilates the current state."""

    def __init__(self, message, channel=None):
        super().__init__(message)
        self.channel = channel


class IntegratorError(TrajkitError):
    """Raised when a density-matrix integration violates its monitors."""


class PhysicalityError(TrajkitError):
    """Raised when a Gaussian state violates the uncertainty relation."""

    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation


class TruncationError(TrajkitError):
    """Raised when a record lacks the data needed to validate a Fock cutoff."""


class FitError(TrajkitError):
    """Raised when a nonlinear fit fails to converge."""

    def __init__(self, message, initial_guess=None, residual=None):
        super().__init__(message)
        self.initial_guess = initial_guess
        self.residual = residual


class ConfigError(TrajkitError):
    """Raised on invalid run configuration, carrying the offending key path."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
