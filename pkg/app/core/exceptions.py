"""
Errors raised by the foraging toolkit.

Every error carries the process exit code the management commands use.
"""

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_IO = 3


class ForagingError(Exception):
    """Base class for toolkit errors"""
    exit_code = EXIT_RUNTIME


class ConfigurationError(ForagingError):
    """Run configuration is invalid"""
    exit_code = EXIT_VALIDATION


class DataValidationError(ForagingError):
    """An input artifact violates its format or invariants"""
    exit_code = EXIT_VALIDATION


class ArtifactMismatchError(ForagingError):
    """Artifacts in a run directory come from different configs"""
    exit_code = EXIT_VALIDATION


class NumericalError(ForagingError):
    """A computation produced a non-finite or degenerate result"""
    exit_code = EXIT_RUNTIME


class ConvergenceError(NumericalError):
    """An iterative method stopped without converging"""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EmptyProfileError(ForagingError):
    """No cluster switch exists anywhere in the analysed corpus"""
    exit_code = EXIT_RUNTIME


class ArtifactIOError(ForagingError):
    """Reading or writing a run artifact failed"""
    exit_code = EXIT_IO


class EmbeddingServiceError(ForagingError):
    """The embedding service failed or returned an unusable response"""
    exit_code = EXIT_IO
