"""Exception hierarchy.

``ValidationError`` covers bad input; everything numerical derives from
``NumericalError`` so callers (and the CLI exit codes) can tell them apart.
"""


class RotorPhononError(Exception):
    pass


class ValidationError(RotorPhononError, ValueError):
    """Invalid configuration or argument. ``errors`` lists every violation."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors) if errors else [message]


class NumericalError(RotorPhononError, ArithmeticError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InstabilityError(NumericalError):
    def __init__(self, message, direction):
        super().__init__(message)
        self.direction = direction


class ResonanceError(NumericalError):
    """A perturbative denominator fell inside the resonance guard band."""

    def __init__(self, message, denominator=None, mode=None):
        super().__init__(message)
        self.denominator = denominator
        self.mode = mode


class BracketError(NumericalError):
    pass


class NonEquilibriumWarning(UserWarning):
    pass


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""
