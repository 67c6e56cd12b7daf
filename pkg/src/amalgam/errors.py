"""Exception hierarchy shared by all amalgam modules."""


class AmalgamError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AmalgamError):
    """Malformed or inconsistent configuration (dimensions, JSON, parameters)."""

    def __init__(self, message: str, pointer: str | None = None):
        super().__init__(message if pointer is None else f"{message} (at {pointer})")
        self.pointer = pointer


class StructureError(AmalgamError):
    """Algebraic structure violated: element outside span, B not inside A, etc."""


class CapacityError(AmalgamError):
    """A computation would exceed a configured size cap."""

    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required


class HypothesisError(AmalgamError):
    """A norm inequality was requested for data violating its hypothesis."""


class TruncationError(AmalgamError):
    """An identity was requested on a domain where truncation invalidates it."""
