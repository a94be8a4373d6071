"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class UndefinedPhaseError(DomainError):
    """The phase of a zero phasor was requested."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach its requested accuracy.

    Attributes
    ----------
    achieved : float
        Best error estimate reached before giving up (``nan`` if unknown).
    """

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""
