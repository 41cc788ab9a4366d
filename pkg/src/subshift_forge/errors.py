"""Exception types shared across the package.

Two families matter to callers: InputError (bad arguments, malformed files,
out-of-domain requests; CLI exit code 2) and ContractError (a mathematical
guarantee failed to hold at runtime; CLI exit code 3).
"""


class SubshiftError(Exception):
    """Base class for all package errors."""


class InputError(SubshiftError, ValueError):
    """Caller handed us something out of domain."""


class AlphabetMismatchError(InputError):
    """Two words or a word and an automaton disagree on the alphabet."""


class EmptySubshiftError(InputError):
    """A construction produced a subshift with no essential states."""


class GapBoundExceededError(InputError):
    """No uniform gap constant was certified below the requested bound."""


class FillNotFoundError(InputError):
    """No connecting fill exists: length below the certified gap, or bad contexts."""


class ResourceCapError(InputError):
    """The requested computation exceeds the documented desk-scale caps."""


class NotInCodedSystemError(SubshiftError):
    """A window admits no block/gap parsing, so it is not from the coded system."""


class AmbiguousParseError(SubshiftError):
    """A window is too short to force a unique block/gap parsing."""


class ContractError(SubshiftError):
    """A verified mathematical property failed; carries forensic context."""

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}
