"""Validation utility functions for diarlite."""

import re
from typing import Optional, Tuple

_RECORDING_ID = re.compile(r"^[A-Za-z0-9._-]+$")
_OVERRIDE_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")


def validate_speaker_count_range(
    min_speakers: int, max_speakers: int
) -> Tuple[bool, Optional[str]]:
    """Validate a synthetic speaker-count range.

    Mixtures hold between 1 and 5 speakers.

    Args:
        min_speakers: Smallest speaker count.
        max_speakers: Largest speaker count.

    Returns:
        Tuple of (is_valid, error_message).
    """
    if min_speakers < 1:
        return False, "Speaker count must be at least 1"
    if max_speakers > 5:
        return (
            False,
            f"At most 5 speakers per mixture are supported, got {max_speakers}",
        )
    if min_speakers > max_speakers:
        return False, "min_speakers must not exceed max_speakers"
    return True, None


def validate_override(override: str) -> Tuple[bool, Optional[str]]:
    """Validate a ``dotted.key=value`` command-line override.

    Returns:
        Tuple of (is_valid, error_message).
    """
    if "=" not in override:
        return False, "Expected KEY=VALUE"
    key, _ = override.split("=", 1)
    if not _OVERRIDE_KEY.match(key.strip()):
        return False, f"Invalid key '{key}'"
    return True, None


def validate_recording_id(recording_id: str) -> Tuple[bool, Optional[str]]:
    """Validate a recording id used in RTTM/CTM fields and file names.

    Returns:
        Tuple of (is_valid, error_message).
    """
    if not recording_id:
        return False, "Recording id cannot be empty"
    if not _RECORDING_ID.match(recording_id):
        return (
            False,
            f"Recording id '{recording_id}' contains whitespace or invalid characters",
        )
    return True, None


def validate_interval(start: float, end: float) -> Tuple[bool, Optional[str]]:
    """Validate a time interval in seconds.

    Returns:
        Tuple of (is_valid, error_message).
    """
    if start < 0:
        return False, f"Negative start time {start}"
    if end <= start:
        return False, f"End time {end} is not after start time {start}"
    return True, None

