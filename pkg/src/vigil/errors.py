"""Exception hierarchy shared across the package."""


class VigilError(Exception):
    """Base class for all errors raised by vigil."""


class InvalidInputError(VigilError, ValueError):
    """A caller-supplied value violates a precondition (non-finite, wrong shape, ...)."""


class TrainingError(VigilError):
    """Training could not produce a valid model (too few points, bad split, ...)."""


class ModelFormatError(VigilError):
    """A persisted model payload is corrupt, truncated, or of an unsupported version."""


class StreamFormatError(VigilError):
    """A feature-frame stream or sidecar file violates the wire format.

    Carries the 1-based line number when the failure is tied to a line.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UndefinedMetricError(VigilError):
    """A requested metric has no defined value (e.g. AUC with one-class labels)."""


class UnknownAlarmError(VigilError, KeyError):
    """An alarm id does not exist in the alarm store."""


class AlarmStateError(VigilError):
    """An operation is not valid for the alarm's current status (e.g. labeling an open alarm)."""
