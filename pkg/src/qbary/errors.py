"""Exception types raised across the package."""


class ContractViolation(ValueError):
    """An input broke a documented precondition (shape, symmetry, NaN, ...)."""


class SingularMatrixError(ArithmeticError):
    """A matrix that must be positive definite has an eigenvalue below the floor."""

    def __init__(self, message, eigenvalue):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class StepTooLargeError(ArithmeticError):
    """The Bures exponential map was asked to step past the injectivity region."""


class EnumerationTooLarge(ContractViolation):
    """Refusal to materialize a group whose order exceeds the enumeration guard."""


class SamplerExhausted(RuntimeError):
    """A finite sample stream ran out before the requested number of iterations."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
