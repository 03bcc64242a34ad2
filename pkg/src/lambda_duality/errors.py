"""Exception hierarchy.

Numerical failures and domain/usage errors are kept in separate branches so the
CLI can map them to distinct exit codes.
"""


class LambdaDualityError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(LambdaDualityError, ValueError):
    """Inputs violate a mathematical precondition."""


class NumericalError(LambdaDualityError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy answer."""


class DomainViolation(DomainError):
    pass


class StartOutsideDomain(DomainError):
    pass


class ParameterOutsideDomain(DomainError):
    pass


class ReparameterizationOutOfRange(DomainError):
    pass


class SupportConditionViolated(DomainError):
    pass


class PositivityViolation(DomainError):
    pass


class ChartViolation(DomainError):
    pass


class ConstraintViolated(DomainError):
    pass


class NormalizationViolation(DomainError):
    pass


class NonFiniteIntegrand(NumericalError):
    pass


class IntegralDiverged(NumericalError):
    pass


class NoAscentDirection(NumericalError):
    pass


class Unbounded(NumericalError):
    pass


class NotInRange(NumericalError):
    pass


class InfiniteDivergence(NumericalError):
    pass


class DataFormatError(DomainError):
    """Malformed input data (CSV rows, column counts, non-numeric cells)."""
