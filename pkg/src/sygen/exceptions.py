"""Exception hierarchy shared by all modules."""


class SygenError(Exception):
    """Base class for errors raised by this package."""


class DomainError(SygenError, ValueError):
    """An argument lies outside the domain of the operation."""


class HypothesisViolation(DomainError):
    """The parameters violate the hypothesis under which a bound holds."""


class NumericalError(SygenError, ArithmeticError):
    """A numerical procedure failed to converge."""

    def __init__(self, message, **diagnostics):
        if diagnostics:
            details = ", ".join(f"{k}={v!r}" for k, v in diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)
        self.diagnostics = diagnostics


class NoRootError(NumericalError):
    """No sign change of the first-order condition could be bracketed."""


class EstimationFailure(NumericalError):
    """An estimating equation has no admissible root for this sample."""
