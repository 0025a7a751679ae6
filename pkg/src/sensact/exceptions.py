"""Exception hierarchy shared by all sensact modules."""


class SensactError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(SensactError, ValueError):
    """Matrix or vector shapes are inconsistent with the operation."""


class DomainError(SensactError, ValueError):
    """An input value lies outside the operation's domain."""


class NilpotencyError(DomainError):
    """A mode matrix is (numerically) nilpotent, so spectral-radius
    contractivity arguments do not apply."""


class StabilityError(SensactError, ValueError):
    """A stability precondition fails (e.g. no bounded steady-state
    covariance exists for the requested sequence)."""


class NumericsError(SensactError, RuntimeError):
    """An iterative solver failed to converge or a computed result
    violates its residual contract."""


class SchemaError(SensactError, ValueError):
    """A configuration or model file does not match the expected schema."""
