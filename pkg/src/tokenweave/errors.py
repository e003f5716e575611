"""Exception hierarchy shared by all tokenweave modules."""


class TokenweaveError(Exception):
    """Base class for every error raised by this package."""


class ConstructionError(TokenweaveError):
    """A share, token or block could not be assembled from its inputs."""


class UsageError(TokenweaveError, ValueError):
    """An operation was called with arguments outside its contract."""


class ExtractionAmbiguous(TokenweaveError):
    """A pattern search matched a position set of the wrong size.

    Raised when noise positions from a random-filled partition are mixed into
    the match set, so the hidden partition cannot be isolated.
    """


class PlanError(TokenweaveError):
    """A token request or target configuration cannot be realised."""


class SpecError(TokenweaveError):
    """A group specification references key material a member does not hold."""
