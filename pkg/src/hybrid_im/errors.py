"""Exception types raised across the package."""


class HybridImError(Exception):
    """Base class for all package errors."""


class NumericalError(HybridImError):
    """Numerical failure (CLI exit code 1)."""


class SingularSystem(NumericalError):
    pass


class DimensionMismatch(HybridImError, ValueError):
    pass


class NonSquare(HybridImError, ValueError):
    pass


class CapMismatch(HybridImError, ValueError):
    pass


class SingularExpansionPoint(NumericalError):
    pass


class DomainViolation(NumericalError):
    pass


class InfeasibleEquilibrium(HybridImError, ValueError):
    pass


class ResonantOrder(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class NonConvergentTrajectory(NumericalError):
    pass


class DegenerateTrajectory(NumericalError):
    pass


class InsufficientSamples(NumericalError):
    pass


class DegenerateNormalizer(NumericalError):
    pass


class ZeroNormReference(NumericalError):
    pass


class ConfigError(HybridImError, ValueError):
    """Invalid or unknown configuration (CLI exit code 2)."""


class ModelFormatError(HybridImError, ValueError):
    pass
