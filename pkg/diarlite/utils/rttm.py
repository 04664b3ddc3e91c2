"""RTTM reading and writing.

One line per segment::

    SPEAKER <recording> 1 <start> <duration> <NA> <NA> <speaker> <NA> <NA>
"""

import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from diarlite.errors import DataError
from diarlite.pipeline.segments import DiarSegment, sort_segments
from diarlite.utils.fileio import atomic_write_text
from diarlite.utils.formatters import format_seconds
from diarlite.utils.validators import validate_recording_id

logger = logging.getLogger(__name__)

RTTM_FIELDS = 10


def parse_rttm_by_recording(text: str) -> Dict[str, List[DiarSegment]]:
    """Parse RTTM text into segments grouped by recording id.

    Blank lines, ``;;`` comments and non-SPEAKER records are skipped.

    Raises:
        DataError: On a malformed SPEAKER line, naming its line number.
    """
    recordings: Dict[str, List[DiarSegment]] = defaultdict(list)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";;"):
            continue
        fields = line.split()
        if fields[0] != "SPEAKER":
            logger.debug("Skipping %s record on line %d", fields[0], line_no)
            continue
        if len(fields) != RTTM_FIELDS:
            raise DataError(
                f"RTTM line {line_no}: expected {RTTM_FIELDS} fields, got {len(fields)}"
            )
        try:
            start = float(fields[3])
            duration = float(fields[4])
        except ValueError as e:
            raise DataError(f"RTTM line {line_no}: bad time field: {e}") from e
        if duration <= 0:
            raise DataError(f"RTTM line {line_no}: non-positive duration {duration}")
        try:
            segment = DiarSegment(fields[7], start, start + duration)
        except DataError as e:
            raise DataError(f"RTTM line {line_no}: {e}") from e
        recordings[fields[1]].append(segment)
    return dict(recordings)


def parse_rttm(text: str, recording_id: Optional[str] = None) -> List[DiarSegment]:
    """Parse RTTM text into a segment list.

    Args:
        text: RTTM content.
        recording_id: Keep only this recording; by default all segments.

    Returns:
        Segments sorted by start time.
    """
    recordings = parse_rttm_by_recording(text)
    if recording_id is not None:
        return sort_segments(recordings.get(recording_id, []))
    return sort_segments(seg for segs in recordings.values() for seg in segs)


def emit_rttm(segments: Iterable[DiarSegment], recording_id: str) -> str:
    """Render segments as RTTM text, fixed to 2 decimals.

    Start and end are rounded before the duration is taken, so every line
    parses back. A segment that rounds to nothing is skipped with a warning.

    Raises:
        DataError: If the recording id cannot be written as one field.
    """
    is_valid, error = validate_recording_id(recording_id)
    if not is_valid:
        raise DataError(error)
    lines = []
    for seg in sort_segments(segments):
        start, end = round(seg.start, 2), round(seg.end, 2)
        if end <= start:
            logger.warning(
                "%s: skipping %s segment at %.3f s that rounds to zero length",
                recording_id,
                seg.speaker,
                seg.start,
            )
            continue
        lines.append(
            f"SPEAKER {recording_id} 1 {format_seconds(start)} "
            f"{format_seconds(end - start)} <NA> <NA> {seg.speaker} <NA> <NA>"
        )
    return "".join(line + "\n" for line in lines)


def read_rttm(
    path: Union[str, Path], recording_id: Optional[str] = None
) -> List[DiarSegment]:
    """Read an RTTM file.

    Raises:
        DataError: If the file cannot be read or is malformed.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"Unable to read RTTM {path}: {e}") from e
    try:
        return parse_rttm(text, recording_id)
    except DataError as e:
        raise DataError(f"{path}: {e}") from e


def write_rttm(
    path: Union[str, Path], segments: Iterable[DiarSegment], recording_id: str
) -> Path:
    """Write segments to an RTTM file atomically."""
    return atomic_write_text(path, emit_rttm(segments, recording_id))
