"""Exception hierarchy.

Three families map onto CLI exit codes: configuration problems (2),
physics-domain violations (3) and solver failures (4).
"""


class ConfigError(ValueError):
    """Malformed or out-of-range user configuration."""


class InvalidCutoffError(ConfigError):
    pass


class NegativeAmplitudeError(ConfigError):
    pass


class InvalidSectorError(ConfigError):
    pass


class PhysicsDomainError(ValueError):
    """Inputs outside the validity domain of a physical model."""


class NegativeAltitudeError(PhysicsDomainError):
    pass


class ZenithOutOfRangeError(PhysicsDomainError):
    pass


class WrongDirectionError(PhysicsDomainError):
    pass


class InvalidEfficiencyError(PhysicsDomainError):
    pass


class NonHermitianInputError(ValueError):
    pass


class SolverError(RuntimeError):
    """Base class for optimisation failures."""


class InfeasibleProblemError(SolverError):
    pass


class SubproblemFailureError(SolverError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class AllInsecureError(RuntimeError):
    """Every point of a parameter scan produced a negative key rate.

    The full table is attached so callers can still inspect it.
    """

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table
