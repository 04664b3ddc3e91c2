"""Model-facing data types.

Feature matrices are stored as (frames, features), the transpose of the
usual ``f x l`` notation.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from diarlite.errors import DataError

FrameSpan = Tuple[int, int]


@dataclass(frozen=True)
class AcousticFeatures:
    """Frame-synchronous feature matrix ``(l^a, f^a)``."""

    frames: np.ndarray
    frame_period: float = 0.01

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames)
        if frames.ndim != 2:
            raise DataError(
                f"Features must be 2-D (frames, dims), got shape {frames.shape}"
            )
        if frames.shape[0] < 1:
            raise DataError("Features hold no frames")
        if not np.all(np.isfinite(frames)):
            raise DataError("Features hold non-finite values")
        if self.frame_period <= 0:
            raise DataError(f"Frame period must be positive, got {self.frame_period}")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def duration(self) -> float:
        return self.num_frames * self.frame_period

    def slice_seconds(self, start: float, end: float) -> "AcousticFeatures":
        """Frames covering ``[start, end)`` seconds (at least one frame)."""
        first = max(0, int(round(start / self.frame_period)))
        last = min(self.num_frames, max(first + 1, int(round(end / self.frame_period))))
        return AcousticFeatures(self.frames[first:last], self.frame_period)


@dataclass(frozen=True)
class SpeakerProfile:
    """A speaker id with its embedding vector."""

    id: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        vector = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        if vector.size == 0 or not np.all(np.isfinite(vector)):
            raise DataError(f"Profile '{self.id}' must be a finite, nonempty vector")
        if float(np.linalg.norm(vector)) <= 0.0:
            raise DataError(f"Profile '{self.id}' has zero norm")
        object.__setattr__(self, "vector", vector)


@dataclass(frozen=True)
class ProfileSet:
    """Ordered speaker profiles; K may exceed the number of active speakers."""

    profiles: Tuple[SpeakerProfile, ...]

    def __post_init__(self) -> None:
        profiles = tuple(self.profiles)
        if not profiles:
            raise DataError("A profile set needs at least one profile")
        ids = [p.id for p in profiles]
        if len(set(ids)) != len(ids):
            raise DataError(f"Duplicate profile ids: {ids}")
        dims = {p.vector.size for p in profiles}
        if len(dims) != 1:
            raise DataError(f"Profiles have inconsistent dimensions: {sorted(dims)}")
        object.__setattr__(self, "profiles", profiles)

    @classmethod
    def from_arrays(cls, ids: Sequence[str], vectors: np.ndarray) -> "ProfileSet":
        vectors = np.asarray(vectors, dtype=np.float64)
        if len(ids) != vectors.shape[0]:
            raise DataError(f"{len(ids)} ids for {vectors.shape[0]} profile vectors")
        return cls(tuple(SpeakerProfile(i, v) for i, v in zip(ids, vectors)))

    def __len__(self) -> int:
        return len(self.profiles)

    @property
    def ids(self) -> List[str]:
        return [p.id for p in self.profiles]

    @property
    def matrix(self) -> np.ndarray:
        """Profiles stacked as ``(K, f^d)``."""
        return np.stack([p.vector for p in self.profiles])

    def index_of(self, speaker_id: str) -> int:
        for i, p in enumerate(self.profiles):
            if p.id == speaker_id:
                return i
        raise DataError(f"Speaker '{speaker_id}' is not in the profile set")

    def permuted(self, order: Sequence[int]) -> "ProfileSet":
        """Profiles reordered so that new position i holds old ``order[i]``."""
        return ProfileSet(tuple(self.profiles[i] for i in order))


@dataclass
class SerializedReference:
    """Teacher-forcing target: SOT tokens, per-token speakers and frame spans.

    ``timings[i]`` is the (start, end) encoder frame of token i, or None for
    the speaker-change and end-of-sequence tokens.
    """

    tokens: List[int]
    speakers: List[int]
    timings: List[Optional[FrameSpan]]

    def __len__(self) -> int:
        return len(self.tokens)

    def validate(
        self,
        eos_id: int,
        sc_id: int,
        num_speakers: Optional[int] = None,
        encoder_length: Optional[int] = None,
        vocab_size: Optional[int] = None,
    ) -> None:
        """Check the structural invariants.

        Raises:
            DataError: Describing the first violation found.
        """
        n = len(self.tokens)
        if n == 0 or self.tokens[-1] != eos_id or self.tokens.count(eos_id) != 1:
            raise DataError("Reference must contain exactly one <eos>, at the end")
        if len(self.speakers) != n or len(self.timings) != n:
            raise DataError("Reference tokens, speakers and timings differ in length")
        rows = zip(self.tokens, self.speakers, self.timings)
        for i, (token, speaker, span) in enumerate(rows):
            if vocab_size is not None and not 0 <= token < vocab_size:
                raise DataError(
                    f"Reference token index {token} at {i} outside vocabulary"
                )
            if speaker < 0 or (num_speakers is not None and speaker >= num_speakers):
                raise DataError(
                    f"Reference speaker index {speaker} at {i} outside profile set "
                    f"of size {num_speakers}"
                )
            special = token in (eos_id, sc_id)
            if special and span is not None:
                raise DataError(f"Special token at {i} must not carry a timing")
            if not special:
                if span is None:
                    raise DataError(f"Token at {i} has no timing")
                start, end = span
                if not 0 <= start <= end:
                    raise DataError(f"Token at {i} has invalid span {span}")
                if encoder_length is not None and end >= encoder_length:
                    raise DataError(
                        f"Token at {i} ends at frame {end}, "
                        f"encoder length is {encoder_length}"
                    )
        segment_speaker: Optional[int] = None
        for token, speaker in zip(self.tokens, self.speakers):
            if token in (eos_id, sc_id):
                segment_speaker = None
                continue
            if segment_speaker is None:
                segment_speaker = speaker
            elif speaker != segment_speaker:
                raise DataError("Speaker changes inside a segment without <sc>")


@dataclass
class SerializedHypothesis:
    """Greedy decoding output.

    Per-token lists share one length; times are None for special tokens.
    """

    tokens: List[int] = field(default_factory=list)
    speakers: List[int] = field(default_factory=list)
    start_frames: List[Optional[int]] = field(default_factory=list)
    end_frames: List[Optional[int]] = field(default_factory=list)
    start_times: List[Optional[float]] = field(default_factory=list)
    end_times: List[Optional[float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)
