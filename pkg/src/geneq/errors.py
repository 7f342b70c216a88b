"""Exception types shared across the package."""


class GeneqError(Exception):
    """Base class for all errors raised by geneq."""


class InputSizeError(GeneqError, ValueError):
    """Input is too short for the requested analysis."""


class ShapeError(GeneqError, ValueError):
    """Array dimensions are inconsistent."""


class DomainError(GeneqError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class NumericError(GeneqError, ArithmeticError):
    """Non-finite values or divergence during a computation."""


class ConfigError(GeneqError, ValueError):
    """Invalid or unsupported configuration value."""


class ValidationError(ConfigError):
    """One or more configuration problems, reported together."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class AudioIOError(GeneqError, OSError):
    """An audio or data file could not be read or written."""
