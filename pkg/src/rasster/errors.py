"""Exception types raised across the package."""


class RassterError(Exception):
    """Base class for all package errors."""


class InvalidGridError(RassterError, ValueError):
    pass


class InvalidPlanError(RassterError, ValueError):
    pass


class UndefinedMetricError(RassterError, ValueError):
    pass


class InfeasibleSceneError(RassterError, ValueError):
    pass


class CapacityError(RassterError, MemoryError):
    """Requested object exceeds the configured memory budget."""


class UndefinedSNRError(RassterError, ValueError):
    pass


class DegenerateSupportError(RassterError, ArithmeticError):
    """The least-squares system on the selected support is rank deficient.

    ``support`` holds the atoms selected before the failure.
    """

    def __init__(self, message, support=()):
        super().__init__(message)
        self.support = list(support)


class OracleInfeasibleError(RassterError, ValueError):
    pass


class ConfigError(RassterError, ValueError):
    pass
