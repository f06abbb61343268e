"""Exception types shared across the package."""


class WfsimError(Exception):
    """Base class for all package-specific errors."""


class DomainError(WfsimError, ValueError):
    """Evaluation requested outside the domain of a tabulated waveform."""


class DecoheredSignalError(WfsimError, RuntimeError):
    """Signal envelope has decayed so far that a phase estimate is meaningless."""


class ConfigError(WfsimError, ValueError):
    """Invalid or inconsistent experiment configuration."""
