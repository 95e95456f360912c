"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/input problems exit
with 2, numerical failures with 3.
"""


class SteinisError(Exception):
    """Base class for package errors."""


class ContractViolation(SteinisError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(SteinisError, ValueError):
    """A point lies outside the domain of a target or kernel."""


class ConfigError(SteinisError, ValueError):
    """A config file, dataset, or CLI input is malformed."""


class NumericalError(SteinisError, RuntimeError):
    """A computation produced non-finite values or failed to stabilize."""
