"""Cutting long-form input into decodable chunks."""

import math
from dataclasses import dataclass
from typing import List, Sequence

from diarlite.errors import ConfigError
from diarlite.pipeline.vad import SpeechRegion


@dataclass(frozen=True)
class Chunk:
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


def split_evenly(start: float, end: float, max_len: float) -> List[Chunk]:
    """``ceil(length / max_len)`` equal pieces of ``[start, end]``."""
    pieces = max(1, math.ceil((end - start) / max_len - 1e-9))
    width = (end - start) / pieces
    bounds = [start + i * width for i in range(pieces)] + [end]
    return [Chunk(bounds[i], bounds[i + 1]) for i in range(pieces)]


def chunk_audio(
    regions: Sequence[SpeechRegion], max_chunk_sec: float = 20.0
) -> List[Chunk]:
    """Cut at the middle of every silence between regions.

    The first chunk starts at the first region and the last ends with the
    last region. Chunks longer than ``max_chunk_sec`` are split evenly.

    Raises:
        ConfigError: If ``max_chunk_sec`` is not positive.
    """
    if max_chunk_sec <= 0:
        raise ConfigError(f"max_chunk_sec must be positive, got {max_chunk_sec}")
    if not regions:
        return []
    bounds = [regions[0].start]
    for prev, cur in zip(regions, regions[1:]):
        bounds.append(0.5 * (prev.end + cur.start))
    bounds.append(regions[-1].end)
    chunks: List[Chunk] = []
    for start, end in zip(bounds, bounds[1:]):
        chunks.extend(split_evenly(start, end, max_chunk_sec))
    return chunks
