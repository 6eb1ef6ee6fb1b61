"""Exception types shared across the toolkit."""

__all__ = [
    "ImpletkitError",
    "FormatError",
    "ShapeError",
    "SplitError",
    "TrainError",
    "EvalError",
    "ProtocolError",
    "UnsupportedError",
    "ClusterError",
    "DegenerateError",
    "ReferenceError",
]


class ImpletkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(ImpletkitError):
    """Malformed input file (ragged rows, non-numeric tokens, empty file)."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ShapeError(ImpletkitError):
    """Array or sequence length does not match what the operation requires."""


class SplitError(ImpletkitError):
    """Dataset cannot be split as requested."""


class TrainError(ImpletkitError):
    """Model training received a degenerate dataset."""


class EvalError(ImpletkitError):
    """Evaluation requested on an empty or incompatible dataset."""


class ProtocolError(ImpletkitError):
    """External model protocol failure; message carries the transport diagnostic."""


class UnsupportedError(ImpletkitError):
    """Operation not available for this model kind or configuration."""


class ClusterError(ImpletkitError):
    """Clustering or averaging invoked on an empty input set."""


class DegenerateError(ImpletkitError):
    """Input too small for the operation (e.g. removal interval of length 1)."""


# Intentionally shadows the builtin within this namespace: the toolkit's file
# formats cross-reference samples by index, and a dangling index is a lookup
# failure, not a weakref error.
class ReferenceError(ImpletkitError, LookupError):
    """A file entry references a sample that does not exist."""
