"""Exception types raised by evoscope."""


class EvoscopeError(Exception):
    """Base class for library errors."""


class DomainError(EvoscopeError, ValueError):
    """Arguments outside the domain of an operation (ordering, horizon, grid)."""


class PropagationError(EvoscopeError, ArithmeticError):
    """ODE propagation or quadrature produced non-finite values."""


class ConstructionError(EvoscopeError, ValueError):
    """A special function could not be built from the given parameters."""


class DegenerateInputError(EvoscopeError, ValueError):
    pass


class ConfigError(EvoscopeError, ValueError):
    """Malformed or invalid configuration text."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
