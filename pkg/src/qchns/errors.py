"""Exception types raised across the package."""


class QCHNSError(Exception):
    """Base class for all package errors."""


class DomainError(QCHNSError, ValueError):
    pass


class NonFiniteInput(QCHNSError, ValueError):
    pass


class CompatibilityViolated(QCHNSError):
    """Right-hand side of a Neumann problem has a non-negligible mean."""


class SolverDiverged(QCHNSError):
    pass


class DensityFloorViolated(QCHNSError):
    pass


class ViscosityNonpositive(QCHNSError):
    pass


class CoefficientSignError(QCHNSError):
    pass


class AssemblyNaN(QCHNSError):
    pass


class SingularSystem(QCHNSError):
    pass


class StepFailed(QCHNSError):
    pass


class ConfigError(QCHNSError, ValueError):
    pass
