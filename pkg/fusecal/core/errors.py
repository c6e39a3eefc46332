"""Exception hierarchy shared by every fusecal layer.

Each class carries a stable ``exit_code`` used by the command-line entry point:
1 for usage/config problems, 2 for data/format problems, 3 for numeric failures.
"""

from typing import Optional, Tuple


class FusecalError(Exception):
    """Base class for all fusecal errors."""

    exit_code = 2

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.stage: Optional[str] = None

    def with_stage(self, stage: str) -> "FusecalError":
        """Attach pipeline stage context without changing the error type."""
        if self.stage is None:
            self.stage = stage
            # add_note is 3.11+
            if hasattr(self, "add_note"):
                self.add_note(f"pipeline stage: {stage}")
        return self


class ConfigError(FusecalError, ValueError):
    exit_code = 1


class ShapeError(FusecalError, ValueError):
    pass


class IndexOutOfRangeError(FusecalError, IndexError):
    pass


class RangeError(FusecalError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateInputError(FusecalError, ValueError):
    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class FormatError(FusecalError):
    """Malformed file. ``field`` names the part of the layout that failed ("magic", "length", ...)."""

    def __init__(self, field: str, message: str = "", line: Optional[int] = None):
        text = f"{field}: {message}" if message else field
        if line is not None:
            text = f"line {line}: {text}"
        super().__init__(text)
        self.field = field
        self.line = line


class UnknownItemError(FusecalError, KeyError):
    def __init__(self, item_id: str, line: Optional[int] = None):
        message = f"unknown item id {item_id!r}"
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.item_id = item_id
        self.line = line

    def __str__(self) -> str:
        return self.args[0]


class KindError(FusecalError, TypeError):
    pass


class EmptyDatabaseError(FusecalError, ValueError):
    pass


class ConstraintError(FusecalError, ValueError):
    pass


class IoError(FusecalError, OSError):
    pass


class ScorerError(FusecalError, RuntimeError):
    def __init__(self, pair: Tuple[int, int], cause: BaseException):
        super().__init__(f"expensive scorer failed on pair {pair}: {cause}")
        self.pair = pair
        self.__cause__ = cause


class TestIsolationError(FusecalError, RuntimeError):
    __test__ = False  # keep pytest from collecting it


class InsufficientDataError(FusecalError, ValueError):
    exit_code = 3


class InsufficientClassesError(FusecalError, ValueError):
    exit_code = 3


class ConvergenceError(FusecalError, ArithmeticError):
    exit_code = 3

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class FlaggedCalibratorError(FusecalError, ValueError):
    exit_code = 3
