"""Exception types shared across the package."""


class FormatError(ValueError):
    """Malformed text or binary input (bad magic, bad tokens, bad layout)."""


class GraphFormatError(FormatError):
    """Malformed graph or signal text."""


class TruncatedPayloadError(FormatError):
    """Binary stream ended before the declared content."""


class VersionMismatchError(FormatError):
    """Binary stream written with an unsupported format version."""


class GraphValidationError(ValueError):
    """Structurally invalid graph, aggregation, or signal for the operation."""


class ChecksumMismatchError(ValueError):
    """Data is bound to a different plan, or the stream is corrupted."""
