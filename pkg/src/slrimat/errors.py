"""Exception types raised across the package."""


class SlrImatError(Exception):
    """Base class for all errors raised by this package."""


class ConvergenceFailure(SlrImatError):
    """The SVD kernel did not converge."""


class NonFiniteError(SlrImatError, ValueError):
    """A matrix contains NaN or Inf where finite values are required."""


class ShapeMismatch(SlrImatError, ValueError):
    pass


class ZeroReference(SlrImatError, ValueError):
    """SNR requested against an all-zero reference matrix."""


class InvalidSpec(SlrImatError, ValueError):
    """Contradictory or out-of-range problem/experiment parameters."""


class InvalidConfig(SlrImatError, ValueError):
    """A solver or run configuration field is out of range.

    ``field`` names the offending field so the CLI can report it.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class InconsistentFrameShape(SlrImatError, ValueError):
    pass


class MatrixParseError(SlrImatError, ValueError):
    """Malformed matrix file; ``line`` and ``column`` are 1-based."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            loc += ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column
