"""Shared exception types."""


class LinsatError(Exception):
    """Base class for all library errors."""


class GuardExceeded(LinsatError):
    """An enumeration or table would exceed its configured size guard."""


class ModelError(LinsatError):
    """A model or instance violates a structural precondition."""


class ProblemFormatError(LinsatError):
    """A problem or report file does not match its schema."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
