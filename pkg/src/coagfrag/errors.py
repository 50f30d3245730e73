"""Exception types shared by the numerical modules."""


class DomainError(ValueError):
    """Argument outside the supported domain of a routine."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to converge or lost all accuracy."""


class PoleError(NumericError):
    """A continued fraction or ratio crossed a pole of the function."""


class ResourceError(RuntimeError):
    """A size cap (terms, nodes, windows) was exceeded."""


class ConfigError(ValueError):
    """Inconsistent configuration for a simulation or a check."""
