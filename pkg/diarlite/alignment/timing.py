"""Conversions between seconds and encoder frames."""

import math
from typing import List, Optional, Sequence, Tuple

from diarlite.alignment.time_heads import TimePosterior
from diarlite.errors import DataError

# Guards floor/ceil against values like 0.2 / 0.04 = 4.999999.
_EPS = 1e-9


def infer_token_times(
    posterior: TimePosterior,
    frame_period: float = 0.01,
    subsample_factor: int = 4,
) -> List[Tuple[float, float]]:
    """Seconds of the argmax start/end frames of each token.

    No validity filtering happens here; ``end < start`` is returned as is.
    """
    step = frame_period * subsample_factor
    return [(s * step, e * step) for s, e in posterior.argmax_frames()]


def map_reference_frames(
    alignments: Sequence[Tuple[float, float]],
    frame_period: float,
    subsample_factor: int,
    num_frames: int,
) -> List[Tuple[int, int]]:
    """Map (start, end) seconds onto encoder frame indices.

    Starts use ``floor(t / step)``; ends use ``ceil(t / step) - 1`` but never
    precede the start. Both are clamped to ``[0, num_frames - 1]``.

    Raises:
        DataError: On a negative time or an empty frame axis.
    """
    if num_frames < 1:
        raise DataError("Encoder frame axis is empty")
    step = frame_period * subsample_factor
    last = num_frames - 1
    frames = []
    for start, end in alignments:
        if start < 0 or end < 0:
            raise DataError(f"Negative alignment time in ({start}, {end})")
        first = min(int(math.floor(start / step + _EPS)), last)
        final = int(math.ceil(end / step - _EPS)) - 1
        final = min(max(final, first), last)
        frames.append((first, final))
    return frames


def split_word_timing(
    start: float, end: float, num_subwords: int
) -> List[Tuple[float, float]]:
    """Share a word's span equally among its subwords.

    Raises:
        DataError: If ``num_subwords`` is not positive or the span is reversed.
    """
    if num_subwords < 1:
        raise DataError(f"A word needs at least one subword, got {num_subwords}")
    if end < start:
        raise DataError(f"Word ends ({end}) before it starts ({start})")
    width = (end - start) / num_subwords
    bounds = [start + i * width for i in range(num_subwords)] + [end]
    return [(bounds[i], bounds[i + 1]) for i in range(num_subwords)]


def clamp_times(
    times: Sequence[Tuple[Optional[float], Optional[float]]], lower: float, upper: float
) -> List[Tuple[Optional[float], Optional[float]]]:
    """Clamp token times into ``[lower, upper]``, keeping None entries."""
    out = []
    for start, end in times:
        out.append(
            (
                None if start is None else min(max(start, lower), upper),
                None if end is None else min(max(end, lower), upper),
            )
        )
    return out
