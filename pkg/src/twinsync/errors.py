"""Exception hierarchy shared across the package."""


class TwinSyncError(Exception):
    """Base class for all package errors."""


class GeneratorError(TwinSyncError, ValueError):
    """An infinitesimal generator failed validation."""


class NegativeOffDiagonal(GeneratorError):
    pass


class RowSumNonzero(GeneratorError):
    pass


class Reducible(GeneratorError):
    pass


class SingularSystem(TwinSyncError, ArithmeticError):
    pass


class WeightLengthMismatch(TwinSyncError, ValueError):
    pass


class CosineZeroVector(TwinSyncError, ValueError):
    pass


class EmptyTrace(TwinSyncError, ValueError):
    pass


class InvalidHorizon(TwinSyncError, ValueError):
    pass


class ScenarioError(TwinSyncError, ValueError):
    pass


class PolicyError(TwinSyncError, ValueError):
    pass


class UnknownState(TwinSyncError, KeyError):
    pass


class DeltaNotZero(TwinSyncError, ValueError):
    pass


class StateSpaceTooLarge(TwinSyncError, MemoryError):
    pass


class NoConvergence(TwinSyncError, ArithmeticError):
    pass


class ConfigError(TwinSyncError, ValueError):
    """Malformed or schema-violating configuration file."""
