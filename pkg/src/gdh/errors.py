"""Exception types shared across the engine."""


class DomainError(ValueError):
    """An input is outside the mathematical domain of the operation."""


class MissingTableError(RuntimeError):
    """A required lower-weight table entry is absent (build-order bug)."""


class BoundError(ValueError):
    """A truncated series is too shallow for the requested bound."""
