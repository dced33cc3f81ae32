"""Exception hierarchy shared by every sugmine module."""


class SugmineError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SugmineError, ValueError):
    pass


class NumericError(SugmineError, ArithmeticError):
    pass


class EmptySequenceError(SugmineError, ValueError):
    pass


class ConfigError(SugmineError, ValueError):
    pass


class DataError(SugmineError, ValueError):
    pass


class ParseError(SugmineError, ValueError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class AlignmentError(SugmineError, ValueError):
    """Prediction sets / gold labels do not cover the same ids in the same order."""

    def __init__(self, message, ids=()):
        self.ids = list(ids)
        if self.ids:
            shown = ", ".join(self.ids[:20])
            more = f" (+{len(self.ids) - 20} more)" if len(self.ids) > 20 else ""
            message = f"{message}: {shown}{more}"
        super().__init__(message)


class TrainingError(SugmineError, RuntimeError):
    pass


class CheckpointError(SugmineError):
    pass


class CheckpointFormatError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointPayloadError(CheckpointError):
    pass


class CheckpointManifestError(CheckpointError):
    pass
