"""Exception hierarchy shared by the engine and the CLI."""


class CasimirError(Exception):
    """Base class for all errors raised by :mod:`sphereplane`."""


class DomainError(CasimirError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class OrderOverflowError(CasimirError, ValueError):
    """Requested angular momentum exceeds the supported cap."""


class ModelParameterError(CasimirError, ValueError):
    """A material model is missing a parameter or has one out of range."""


class UnsupportedModel(CasimirError, ValueError):
    pass


class NonPositiveDeterminant(CasimirError, ArithmeticError):
    """``det(1 - M)`` came out non-positive; truncation or scaling failed."""


class NonConvergence(CasimirError, RuntimeError):
    pass


class FitIllConditioned(CasimirError, ArithmeticError):
    pass


class BalancingOverflow(CasimirError, OverflowError):
    pass
