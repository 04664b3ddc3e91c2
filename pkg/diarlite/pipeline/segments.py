"""Speaker segments and the token-to-segment merge rule."""

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

from diarlite.errors import DataError
from diarlite.utils.validators import validate_interval


@dataclass(frozen=True)
class DiarSegment:
    """One speaker activity interval in seconds."""

    speaker: str
    start: float
    end: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise DataError(f"Non-finite segment bounds ({self.start}, {self.end})")
        is_valid, error = validate_interval(self.start, self.end)
        if not is_valid:
            raise DataError(f"{error} for speaker {self.speaker}")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class TimedToken:
    """A decoded token with its speaker and absolute times.

    Times come straight from argmax frames, so ``end < start`` is possible;
    :func:`tokens_to_segments` filters such tokens. ``merged`` marks a span
    that already went through the merge rule.
    """

    token: str
    speaker: str
    start: float
    end: float
    merged: bool = False

    @property
    def duration(self) -> float:
        return self.end - self.start


def sort_segments(segments: Iterable[DiarSegment]) -> List[DiarSegment]:
    """Order segments by start, end, then speaker."""
    return sorted(segments, key=lambda s: (s.start, s.end, s.speaker))


def segments_by_speaker(
    segments: Iterable[DiarSegment],
) -> Dict[str, List[DiarSegment]]:
    """Group segments per speaker, each list sorted by start."""
    grouped: Dict[str, List[DiarSegment]] = defaultdict(list)
    for segment in segments:
        grouped[segment.speaker].append(segment)
    return {spk: sort_segments(items) for spk, items in sorted(grouped.items())}


def is_abnormal(token: TimedToken, max_token_dur: float) -> bool:
    """True for tokens ending before they start, or lasting ``max_token_dur`` or longer.

    The duration rule only applies to decoded tokens; a merged span keeps
    whatever length the merge gave it.
    """
    if token.end < token.start:
        return True
    return not token.merged and token.duration >= max_token_dur


def merge_tokens(
    tokens: Iterable[TimedToken], merge_gap: float = 2.0
) -> List[DiarSegment]:
    """Merge each speaker's tokens into segments, bridging gaps below ``merge_gap``.

    Raises:
        DataError: If ``merge_gap`` is not positive.
    """
    if merge_gap <= 0:
        raise DataError(f"merge_gap must be positive, got {merge_gap}")
    per_speaker: Dict[str, List[TimedToken]] = defaultdict(list)
    for token in tokens:
        per_speaker[token.speaker].append(token)

    segments: List[DiarSegment] = []
    for speaker, items in per_speaker.items():
        items.sort(key=lambda t: (t.start, t.end))
        start, end = items[0].start, items[0].end
        for token in items[1:]:
            if token.start - end < merge_gap:
                end = max(end, token.end)
            else:
                segments.append(_segment(speaker, start, end))
                start, end = token.start, token.end
        segments.append(_segment(speaker, start, end))
    return sort_segments(s for s in segments if s is not None)


def tokens_to_segments(
    tokens: Sequence[TimedToken],
    merge_gap: float = 2.0,
    max_token_dur: float = 2.0,
) -> List[DiarSegment]:
    """Turn speaker-attributed timed tokens into speaker segments.

    Abnormal tokens are dropped first. Then each speaker's tokens are sorted
    by start and a token joins the current segment when it starts less than
    ``merge_gap`` seconds after the segment's end. Feeding the result back
    through :func:`segments_as_tokens` returns the same segments.

    Args:
        tokens: Tokens with absolute times.
        merge_gap: M, the largest gap bridged inside one segment.
        max_token_dur: N, decoded tokens at least this long are dropped.

    Returns:
        Segments sorted by start time.

    Raises:
        DataError: If ``merge_gap`` or ``max_token_dur`` is not positive.
    """
    if merge_gap <= 0 or max_token_dur <= 0:
        raise DataError("merge_gap and max_token_dur must be positive")
    kept = (t for t in tokens if not is_abnormal(t, max_token_dur))
    return merge_tokens(kept, merge_gap)


def _segment(speaker: str, start: float, end: float):
    # Zero-length tokens survive filtering but make no segment.
    if end <= start:
        return None
    return DiarSegment(speaker, max(0.0, start), end)


def segments_as_tokens(segments: Iterable[DiarSegment]) -> List[TimedToken]:
    """View segments as one merged pseudo-token each, for re-merging."""
    return [TimedToken("", s.speaker, s.start, s.end, merged=True) for s in segments]
