"""Exception hierarchy shared by all solver modules."""


class RQHDError(Exception):
    """Base class; the CLI maps subclasses of this to exit codes."""

    exit_code = 3


class CompatibilityError(RQHDError):
    """Poisson right-hand side has a nonzero mean beyond tolerance."""


class DomainError(RQHDError, ValueError):
    pass


class DegenerateParameterError(RQHDError, ValueError):
    pass


class PreconditionError(RQHDError, ValueError):
    pass


class StabilityError(RQHDError):
    """Time step exceeds the explicit stability bound."""


class VacuumError(RQHDError):
    """Density dropped below the vacuum floor; the phase is undefined there."""


class IrrotationalityError(RQHDError):
    pass


class NoConvergenceError(RQHDError):
    """Picard iteration did not reach tolerance.

    The partial :class:`IterationReport` is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AdmissibilityError(PreconditionError):
    """Initial density is not a small perturbation of the reference state."""


class StudyError(RQHDError):
    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table


class FitError(RQHDError, ValueError):
    pass


class MemoryBudgetError(RQHDError):
    pass


class ConfigError(RQHDError):
    exit_code = 2


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


class SnapshotError(RQHDError):
    """Malformed or unreadable snapshot file."""

    exit_code = 4
