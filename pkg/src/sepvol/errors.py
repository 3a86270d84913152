"""Exception hierarchy shared by all modules."""


class SepvolError(Exception):
    pass


class DomainError(SepvolError, ValueError):
    """Argument outside the domain of a special function or operation."""


class SingularBlock(SepvolError, ArithmeticError):
    pass


class SingularInput(SepvolError, ArithmeticError):
    pass


class NotPositive(SepvolError, ValueError):
    pass


class Unsupported(SepvolError, ValueError):
    """Requested combination relies on an unproven identity."""


class TableTooCoarse(SepvolError):
    pass


class NoConvergence(SepvolError, RuntimeError):
    """Iteration budget exhausted; ``partial`` carries the best result so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
