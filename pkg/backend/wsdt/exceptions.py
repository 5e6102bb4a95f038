"""
Exception hierarchy shared by the library and the management commands.

Every error carries the process exit code the command layer reports for it.
"""


class WSDTError(Exception):
    """Base class for all errors raised by the wsdt package."""

    exit_code = 2


class DimensionError(WSDTError):
    """Array shapes or extents do not satisfy an operation's requirements."""


class ConfigurationError(WSDTError):
    """A configuration value, plan or mask is unusable."""


class ContractError(WSDTError):
    """An argument violates an operation's precondition."""


class NumericalError(WSDTError):
    """A computation produced a non-finite value."""

    exit_code = 3
