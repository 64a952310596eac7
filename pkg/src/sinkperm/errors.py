"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Structurally bad input: wrong shape, non-finite values, labels out of range."""


class InvalidParameterError(ValueError):
    """A tuning parameter outside its admissible range (lambda <= 0, alpha <= 0, ...)."""


class KernelUnderflowError(ArithmeticError):
    """exp(-D/lambda) underflowed to zero somewhere.

    Raised instead of silently producing NaN scalings.  Increase lambda or
    rescale the data so the cost matrix has a smaller numeric range.
    """


class ConfigError(Exception):
    """Bad experiment configuration (unknown scenario id, zero repetitions, ...)."""
