class CachesimError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CachesimError, ValueError):
    pass


class DegenerateInstanceError(CachesimError, ValueError):
    """The instance carries no distortion to reduce (all weights zero)."""


class InfeasibleDesignError(CachesimError, ValueError):
    """A cache design asks for more than its storing range or cache allows."""


class EnumerationCapError(InvalidArgumentError):
    """Exact enumeration requested beyond its cap; use sampling or a symmetric bound."""


class ConfigError(CachesimError):
    """Experiment configuration failed validation."""
