"""Exception hierarchy for diarlite."""

from typing import Dict, Optional, Tuple


class DiarliteError(Exception):
    """Base class for every error raised by diarlite."""


class ConfigError(DiarliteError, ValueError):
    """Invalid configuration or command-line usage."""


class DataError(DiarliteError, ValueError):
    """Malformed or inconsistent input data."""


class NumericError(DiarliteError, ArithmeticError):
    """Non-finite values or shape mismatches in the numeric substrate."""


class InvariantError(DiarliteError, AssertionError):
    """An internal invariant was violated."""


class CheckpointError(DataError):
    """Checkpoint does not match the model it is loaded into."""

    def __init__(
        self,
        message: str,
        shape_diff: Optional[Dict[str, Tuple[Optional[tuple], Optional[tuple]]]] = None,
    ) -> None:
        """Initialize the error.

        Args:
            message: Human-readable summary.
            shape_diff: Parameter name -> (expected shape, found shape); a
                missing side is None.
        """
        self.shape_diff = shape_diff or {}
        if self.shape_diff:
            lines = [
                f"  {name}: expected {expected}, found {found}"
                for name, (expected, found) in sorted(self.shape_diff.items())
            ]
            message = message + "\n" + "\n".join(lines)
        super().__init__(message)
