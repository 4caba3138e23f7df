"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: format/shape problems are exit 3,
everything else raised at runtime is exit 4.
"""


class RennTrackError(Exception):
    """Base class for all package errors."""


class DescriptorError(RennTrackError):
    """Descriptor has the wrong shape, dimension, or zero norm."""


class ContractionViolationError(RennTrackError):
    """A decay factor outside (0, 1) was handed to the memory store.

    Factors >= 1 would break the guarantee that repeated matching
    drives an exemplar's eligibility to zero.
    """


class SequencingError(RennTrackError):
    """Frames were submitted out of order."""


class StreamFormatError(RennTrackError):
    """A stream or results file is malformed.

    Carries the 1-based line number when it is known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigError(RennTrackError):
    """Invalid or unsatisfiable configuration."""


class MetricUndefinedError(RennTrackError):
    """A metric was requested on input for which it is undefined."""
