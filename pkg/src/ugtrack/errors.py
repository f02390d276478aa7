"""Exception hierarchy shared by all modules."""


class UgtrackError(Exception):
    """Base class for all errors raised by this package."""


class InputError(UgtrackError, ValueError):
    """Rejected input: bad dimensions, invalid values, malformed data."""


class NumericError(UgtrackError, ArithmeticError):
    """Numerical failure: non-positive-definite or singular matrix."""


class ConfigError(UgtrackError, ValueError):
    """Invalid or incomplete configuration."""


class CalibrationError(UgtrackError, ValueError):
    """Not enough data to calibrate noise statistics."""


class ParseError(UgtrackError, ValueError):
    """Malformed file content; carries file position context in the message."""


class SequencingError(UgtrackError, ValueError):
    """Frames presented out of order."""
