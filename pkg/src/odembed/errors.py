"""Exception types shared across the package."""


class OdembedError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(OdembedError):
    """Expression text does not conform to the grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DomainError(OdembedError):
    """Evaluation outside the valid domain (ln of a non-positive value,
    division by zero, point outside declared bounds, ...)."""

    def __init__(self, message: str, component: int | None = None):
        if component is not None:
            message = f"component {component}: {message}"
        super().__init__(message)
        self.component = component


class PreconditionError(OdembedError):
    """An operation was called with arguments outside its contract."""


class InconclusiveError(OdembedError):
    """A classification could not be decided either way (never an obstruction)."""


class IntegrationError(OdembedError):
    """Numerical integration did not complete (blow-up or step limit)."""

    def __init__(self, message: str, status: str, t_star: float | None = None):
        super().__init__(message)
        self.status = status
        self.t_star = t_star
