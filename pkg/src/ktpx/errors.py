"""Exception types shared across the extraction pipeline."""


class KtpxError(Exception):
    """Base class for all pipeline errors."""


class DimensionError(KtpxError):
    """Image has the wrong channel count, depth, or shape for an operation."""


class DecodeError(KtpxError):
    """Input bytes could not be decoded as an image."""


class ParseError(KtpxError):
    """A word-dump row could not be parsed.

    Carries the 1-based row number of the offending line.
    """

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class EmptyLineError(KtpxError):
    """Confidence aggregation was asked for an empty word list."""


class EngineUnavailableError(KtpxError):
    """The external OCR engine binary could not be found."""


class EngineFailureError(KtpxError):
    """The external OCR engine exited with a nonzero status."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class BoundsError(KtpxError):
    """A rectangle or crop box falls outside the image."""


class DatasetError(KtpxError):
    """Gold annotations and predictions do not line up."""


class RecordValidationError(KtpxError):
    """A record field violates its schema predicate.

    ``violations`` maps field name to a human-readable reason.
    """

    def __init__(self, violations: dict[str, str]):
        super().__init__("; ".join(f"{k}: {v}" for k, v in sorted(violations.items())))
        self.violations = violations


class TerminalStatusError(KtpxError):
    """A correction targeted a record whose status can no longer change."""


class StoreError(KtpxError):
    """The persistence log is malformed or references unknown records."""


class StaleRevisionError(KtpxError):
    """A correction was submitted against an outdated record revision."""

    def __init__(self, expected: int, got: int):
        super().__init__(f"record is at revision {expected}, correction targeted {got}")
        self.expected = expected
        self.got = got
