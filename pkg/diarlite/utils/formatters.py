"""Formatting helpers for seconds, rates and report numbers."""

import math
from typing import Any


def format_significant(value: float, digits: int = 6) -> str:
    """Format a float with a fixed number of significant digits.

    Args:
        value: The number to format.
        digits: Significant digits to keep.

    Returns:
        Shortest text with at most ``digits`` significant digits.
    """
    if value is None:
        return "nan"
    if math.isinf(value) or math.isnan(value):
        return str(value)
    return f"{value:.{digits}g}"


def round_significant(value: float, digits: int = 6) -> float:
    """Round a float to ``digits`` significant digits."""
    if not math.isfinite(value):
        return value
    return float(format_significant(value, digits))


def round_floats(obj: Any, digits: int = 6) -> Any:
    """Recursively round every float inside dicts/lists/tuples."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return round_significant(obj, digits)
    if isinstance(obj, dict):
        return {key: round_floats(value, digits) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(value, digits) for value in obj]
    return obj


def format_seconds(value: float) -> str:
    """Format seconds as fixed-point text with 2 decimals (RTTM/CTM fields)."""
    text = f"{value:.2f}"
    return "0.00" if text == "-0.00" else text


def format_percent(value: float) -> str:
    """Format a percentage for tables (one decimal)."""
    if value is None or not math.isfinite(value):
        return "-"
    return f"{value:.1f}"


def format_delta_loss(previous: float, current: float) -> str:
    """Format a loss change with an explicit sign."""
    delta = current - previous
    if delta > 0:
        return f"+{delta:.4f}"
    if delta < 0:
        return f"{delta:.4f}"
    return "±0"
