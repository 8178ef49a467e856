"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems exit with 2 and
numerical/training failures with 3 (usage errors are handled by argparse
and exit with 1).
"""


class FtcalError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(FtcalError):
    """Invalid arguments or malformed input data."""


class EmptyGroupError(ValidationError):
    """An operation needed samples from a label group that has none."""


class MissingClassError(ValidationError):
    """A requested class has no data to support the operation."""


class DegenerateInputError(ValidationError):
    """Structurally valid input that is degenerate (e.g. identical rows)."""


class ParseError(ValidationError):
    """A file could not be parsed; the message carries the 1-based line number."""


class ShapeError(ValidationError):
    """Declared or expected shape does not match the actual content."""


class TrainingError(FtcalError):
    """Training produced a non-finite loss or otherwise failed."""
