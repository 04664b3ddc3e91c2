"""Sliding-window speaker embeddings over speech regions."""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from diarlite.errors import ConfigError
from diarlite.model.types import AcousticFeatures
from diarlite.pipeline.vad import SpeechRegion
from diarlite.synth.inventory import extract_profile


@dataclass
class WindowEmbedding:
    start: float
    end: float
    vector: np.ndarray

    @property
    def center(self) -> float:
        return 0.5 * (self.start + self.end)


def tile_region(first: int, last: int, window: int, hop: int) -> List[Tuple[int, int]]:
    """Frame windows ``[s, e)`` tiling ``[first, last)``.

    Full windows advance by ``hop``; when they stop short of ``last``, one
    partial window from the next start to ``last`` is kept if it spans at
    least half a window.
    """
    spans = []
    start = first
    while start + window <= last:
        spans.append((start, start + window))
        start += hop
    covered = spans[-1][1] if spans else first
    if covered < last and 2 * (last - start) >= window:
        spans.append((start, last))
    return spans


def window_embeddings(
    features: AcousticFeatures,
    regions: Sequence[SpeechRegion],
    projection: np.ndarray,
    window_sec: float = 1.5,
    hop_sec: float = 0.75,
) -> List[WindowEmbedding]:
    """Embed every window tiled over the speech regions.

    Raises:
        ConfigError: If the window or hop rounds to zero frames or
            ``hop_sec > window_sec``.
    """
    period = features.frame_period
    window = int(round(window_sec / period))
    hop = int(round(hop_sec / period))
    if window < 1 or hop < 1 or hop > window:
        raise ConfigError(
            f"Bad window/hop ({window_sec}, {hop_sec}) for frame period {period}"
        )
    embeddings = []
    for region in regions:
        first = int(round(region.start / period))
        last = min(features.num_frames, int(round(region.end / period)))
        for s, e in tile_region(first, last, window, hop):
            vector = extract_profile(features.frames[s:e], projection)
            embeddings.append(WindowEmbedding(s * period, e * period, vector))
    return embeddings
