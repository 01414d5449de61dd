"""
Base exception hierarchy.

Each base class carries the exit code the command line maps it to. Modules
define their specific errors next to the code that raises them and derive
from one of these bases.
"""


class GouRuinError(Exception):
    """Base exception for all errors raised by the package."""
    exit_code: int = 3


class ConfigError(GouRuinError):
    """Custom exception for invalid configuration or model parameters."""
    exit_code = 1


class ConditionGateError(GouRuinError):
    """Custom exception raised when the conditions of the ruin asymptotics are not established."""
    exit_code = 2


class NumericalError(GouRuinError):
    """Custom exception for numerical failures (root not found, too few ruins, ...)."""
    exit_code = 3
