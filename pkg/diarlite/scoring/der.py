"""Diarization error rate on a fixed time grid.

Every grid frame carries the set of active reference and hypothesis
speakers. With ``Nr`` and ``Nh`` active counts and ``C`` the mapped pairs
active together, a frame adds ``max(0, Nr - Nh)`` missed,
``max(0, Nh - Nr)`` false-alarm and ``min(Nr, Nh) - C`` confused speaker
frames. Overlapped speech counts once per active reference speaker.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from diarlite.errors import DataError
from diarlite.pipeline.segments import DiarSegment
from diarlite.scoring.assignment import map_speakers_optimal


@dataclass
class DerResult:
    """Frame counts of one scoring; percentages are over reference speech."""

    ser_frames: int
    miss_frames: int
    fa_frames: int
    total_frames: int
    grid_sec: float = 0.01
    mapping: Dict[str, str] = field(default_factory=dict)

    def _pct(self, frames: int) -> float:
        return 100.0 * frames / max(self.total_frames, 1)

    @property
    def error_frames(self) -> int:
        return self.ser_frames + self.miss_frames + self.fa_frames

    @property
    def ser(self) -> float:
        return self._pct(self.ser_frames)

    @property
    def miss(self) -> float:
        return self._pct(self.miss_frames)

    @property
    def fa(self) -> float:
        return self._pct(self.fa_frames)

    @property
    def der(self) -> float:
        return self._pct(self.error_frames)

    @property
    def total_ref_speech_sec(self) -> float:
        return self.total_frames * self.grid_sec


def _frame(t: float, grid_sec: float) -> int:
    return int(round(t / grid_sec))


def activity_matrix(
    segments: Sequence[DiarSegment],
    speakers: Sequence[str],
    num_frames: int,
    grid_sec: float,
) -> np.ndarray:
    """Boolean ``(speakers, frames)`` activity; a segment covers ``[start, end)``."""
    index = {spk: i for i, spk in enumerate(speakers)}
    active = np.zeros((len(speakers), num_frames), dtype=bool)
    for seg in segments:
        first, last = _frame(seg.start, grid_sec), _frame(seg.end, grid_sec)
        active[index[seg.speaker], first:last] = True
    return active


def collar_mask(
    segments: Sequence[DiarSegment], num_frames: int, collar_sec: float, grid_sec: float
) -> np.ndarray:
    """True on scored frames, all but ``collar_sec`` around reference boundaries."""
    scored = np.ones(num_frames, dtype=bool)
    if collar_sec <= 0:
        return scored
    for seg in segments:
        for boundary in (seg.start, seg.end):
            lo = max(0, _frame(boundary - collar_sec, grid_sec))
            hi = min(num_frames, _frame(boundary + collar_sec, grid_sec))
            scored[lo:hi] = False
    return scored


def score_frames(
    ref: np.ndarray, hyp: np.ndarray, mapping: Dict[int, int]
) -> Tuple[int, int, int, int]:
    """``(ser, miss, fa, total)`` frame counts for a given mapping."""
    n_ref = ref.sum(axis=0).astype(np.int64)
    n_hyp = hyp.sum(axis=0).astype(np.int64)
    correct = np.zeros_like(n_ref)
    for r, h in mapping.items():
        correct += ref[r] & hyp[h]
    miss = int(np.maximum(0, n_ref - n_hyp).sum())
    fa = int(np.maximum(0, n_hyp - n_ref).sum())
    ser = int((np.minimum(n_ref, n_hyp) - correct).sum())
    return ser, miss, fa, int(n_ref.sum())


def prepare(
    ref: Sequence[DiarSegment],
    hyp: Sequence[DiarSegment],
    collar_sec: float = 0.0,
    grid_sec: float = 0.01,
) -> Tuple[List[str], List[str], np.ndarray, np.ndarray]:
    """Speaker labels and scored activity matrices of both sides."""
    if collar_sec < 0 or grid_sec <= 0:
        raise DataError(f"Bad collar {collar_sec} or grid {grid_sec}")
    for seg in list(ref) + list(hyp):
        if seg.start < 0 or seg.end < 0:
            raise DataError(f"Negative time in segment {seg}")
    num_frames = max([_frame(s.end, grid_sec) for s in list(ref) + list(hyp)] + [0])
    ref_speakers = sorted({s.speaker for s in ref})
    hyp_speakers = sorted({s.speaker for s in hyp})
    scored = collar_mask(ref, num_frames, collar_sec, grid_sec)
    ref_active = activity_matrix(ref, ref_speakers, num_frames, grid_sec) & scored
    hyp_active = activity_matrix(hyp, hyp_speakers, num_frames, grid_sec) & scored
    return ref_speakers, hyp_speakers, ref_active, hyp_active


def der(
    ref: Sequence[DiarSegment],
    hyp: Sequence[DiarSegment],
    collar_sec: float = 0.0,
    grid_sec: float = 0.01,
) -> DerResult:
    """Score a hypothesis against a reference under the best speaker mapping.

    Raises:
        DataError: On negative times or a bad collar or grid.
    """
    ref_speakers, hyp_speakers, ref_active, hyp_active = prepare(
        ref, hyp, collar_sec, grid_sec
    )
    overlap = ref_active.astype(np.int64) @ hyp_active.astype(np.int64).T
    mapping = map_speakers_optimal(overlap)
    ser, miss, fa, total = score_frames(ref_active, hyp_active, mapping)
    return DerResult(
        ser_frames=ser,
        miss_frames=miss,
        fa_frames=fa,
        total_frames=total,
        grid_sec=grid_sec,
        mapping={ref_speakers[r]: hyp_speakers[h] for r, h in mapping.items()},
    )
