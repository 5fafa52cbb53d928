"""Shared exception types and process exit codes."""


class DiophError(Exception):
    """Base class for all toolkit errors."""


class LiteralParseError(DiophError):
    """A real-number or approximating-function literal failed to parse."""

    exit_status = 2


class BudgetExceeded(DiophError):
    """An enumeration or scan surpassed its configured cost cap."""

    exit_status = 3


class PrecisionExhausted(DiophError):
    """A certified comparison could not be resolved within the bit budget."""

    exit_status = 4


class DriftDetected(DiophError):
    """A replayed run produced output differing from the recorded one."""

    exit_status = 5


class PreconditionViolated(DiophError):
    """An operation's mathematical precondition failed (reported, not a bug)."""

    exit_status = 2
