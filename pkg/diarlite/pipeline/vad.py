"""Energy-based voice activity detection on feature frames."""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from diarlite.errors import DataError
from diarlite.model.types import AcousticFeatures

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpeechRegion:
    """Speech interval in seconds."""

    start: float
    end: float

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise DataError(
                f"Speech region start {self.start} is not before end {self.end}"
            )

    @property
    def duration(self) -> float:
        return self.end - self.start


def frame_runs(active: np.ndarray) -> List[List[int]]:
    """``[first, last_exclusive]`` index pairs of consecutive True values."""
    padded = np.concatenate([[False], np.asarray(active, dtype=bool), [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [[int(a), int(b)] for a, b in zip(edges[::2], edges[1::2])]


def detect_speech(
    features: AcousticFeatures,
    energy_threshold: float = 0.6,
    min_silence_sec: float = 0.3,
) -> List[SpeechRegion]:
    """Group frames whose norm exceeds ``energy_threshold`` into regions.

    Silences shorter than ``min_silence_sec`` between two runs are bridged.
    A run of frames ``[a, b)`` becomes the region ``[a * p, b * p]`` for frame
    period ``p``.

    Returns:
        Sorted, non-overlapping regions; empty when nothing is loud enough.
    """
    norms = np.linalg.norm(features.frames, axis=1)
    runs = frame_runs(norms > energy_threshold)
    min_gap = int(round(min_silence_sec / features.frame_period))
    merged: List[List[int]] = []
    for run in runs:
        if merged and run[0] - merged[-1][1] < min_gap:
            merged[-1][1] = run[1]
        else:
            merged.append(run)
    period = features.frame_period
    regions = [SpeechRegion(a * period, b * period) for a, b in merged]
    logger.debug("VAD found %d regions in %d frames", len(regions), features.num_frames)
    return regions
