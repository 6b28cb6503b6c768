"""Exception types shared across modules."""


class UnknownChannelError(LookupError):
    """A channel id that is not registered."""


class DuplicateNodeError(ValueError):
    """Registration attempted for a node_id that already has a channel."""


class InsufficientDataError(ValueError):
    """An analysis was asked to run on less data than it needs."""

    def __init__(self, message: str, needed: int | None = None, got: int | None = None):
        super().__init__(message)
        self.needed = needed
        self.got = got
