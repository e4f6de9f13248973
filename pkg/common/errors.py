"""
Error types shared across the laboratory
Each maps to a distinct CLI exit code in iteration_lab.main
"""


class LabError(ValueError):
    """Base class for all laboratory errors"""


class ConfigError(LabError):
    """Malformed config or a violated type invariant (exit code 1)"""


class PreconditionError(LabError):
    """A bound or theorem precondition does not hold (exit code 2)"""


class DomainViolationError(LabError):
    """A point lies outside the closed domain ball"""
