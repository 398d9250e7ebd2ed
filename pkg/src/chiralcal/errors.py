"""Exception hierarchy shared by every module."""


class CalibrationError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(CalibrationError, ValueError):
    pass


class InvalidStateError(CalibrationError, ValueError):
    pass


class UnknownStateError(CalibrationError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InvalidFrameError(CalibrationError, ValueError):
    pass


class NotAStateError(InvalidStateError):
    """Raised when an operation needs a positive state and gets an indefinite matrix."""


class JoinError(CalibrationError):
    """Alice's and Bob's records cannot be matched pair by pair."""


class InsufficientDataError(CalibrationError):
    pass


class ProtocolError(CalibrationError):
    pass


class SessionAborted(CalibrationError):
    """A session stopped early; ``transcript`` holds whatever was logged."""

    def __init__(self, message, transcript=None):
        super().__init__(message)
        self.transcript = transcript


class ChannelClosed(ProtocolError):
    """The other end went away or the channel was shut down."""
