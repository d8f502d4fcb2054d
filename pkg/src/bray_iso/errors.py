"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to converge or lost accuracy.

    ``partial`` optionally carries whatever was computed before the failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
