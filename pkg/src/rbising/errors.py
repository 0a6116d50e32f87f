"""Exception types raised by rbising."""


class RBIsingError(Exception):
    """Base class for all library errors."""


class DomainError(RBIsingError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ValidationError(RBIsingError, ValueError):
    """A covariance matrix or model file failed validation."""


class CapacityError(RBIsingError):
    """An exact enumeration would exceed its term budget."""


class NumericalError(RBIsingError, ArithmeticError):
    """A numerical routine failed to reach its target accuracy."""


class FittingError(RBIsingError):
    """A fit could not be carried out or did not converge.

    Attributes
    ----------
    best : object or None
        Best candidate found before giving up, if any.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
