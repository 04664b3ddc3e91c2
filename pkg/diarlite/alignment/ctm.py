"""CTM-like token timing files.

One line per token::

    <recording> <speaker> <start_sec> <dur_sec> <token>
"""

from dataclasses import dataclass
from typing import Iterable, List

from diarlite.errors import DataError
from diarlite.pipeline.segments import TimedToken
from diarlite.utils.formatters import format_seconds


@dataclass(frozen=True)
class CtmEntry:
    recording: str
    speaker: str
    start: float
    duration: float
    token: str


def emit_ctm(recording_id: str, tokens: Iterable[TimedToken]) -> str:
    """Render timed tokens, ordered by start time then speaker."""
    ordered = sorted(tokens, key=lambda t: (t.start, t.speaker, t.end))
    return "".join(
        f"{recording_id} {t.speaker} {format_seconds(t.start)} "
        f"{format_seconds(t.end - t.start)} {t.token}\n"
        for t in ordered
    )


def parse_ctm(text: str) -> List[CtmEntry]:
    """Parse CTM-like text.

    Raises:
        DataError: On a line without exactly five fields or with bad numbers.
    """
    entries = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";;"):
            continue
        fields = line.split()
        if len(fields) != 5:
            raise DataError(f"CTM line {line_no}: expected 5 fields, got {len(fields)}")
        try:
            start, duration = float(fields[2]), float(fields[3])
        except ValueError as e:
            raise DataError(f"CTM line {line_no}: bad time field: {e}") from e
        entries.append(CtmEntry(fields[0], fields[1], start, duration, fields[4]))
    return entries
