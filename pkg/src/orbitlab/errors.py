"""Exception hierarchy. Numerical precondition failures map to CLI exit code 3."""


class OrbitLabError(Exception):
    pass


class ConfigError(OrbitLabError):
    """Malformed configuration or arguments (exit code 2)."""


class NumericalError(OrbitLabError):
    """A numerical precondition does not hold (exit code 3)."""


class InsufficientDigits(NumericalError):
    pass


class DomainError(NumericalError):
    pass


class DegenerateFit(NumericalError):
    pass


class NotMonotone(NumericalError):
    pass


class PrecisionExhausted(NumericalError):
    pass


class DegenerateOrbit(NumericalError):
    pass


class PreconditionError(NumericalError):
    pass
