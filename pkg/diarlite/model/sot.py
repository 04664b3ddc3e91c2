"""Serialized output training (SOT) for multi-talker transcripts.

Utterances are ordered by start time and joined with ``<sc>``; the sequence
ends with ``<eos>``. ``<sc>`` takes the speaker of the utterance it
introduces and ``<eos>`` the speaker of the last utterance.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from diarlite.model.types import FrameSpan, SerializedReference
from diarlite.model.vocab import Vocabulary


@dataclass
class SotSegment:
    """One utterance: speaker index, token ids and optional frame spans."""

    speaker: int
    tokens: List[int]
    start: float = 0.0
    timings: Optional[List[FrameSpan]] = None


def serialize_sot(
    segments: Sequence[SotSegment], vocab: Vocabulary
) -> SerializedReference:
    """Build the SOT reference from utterance segments.

    Segments are stably sorted by start time; empty ones are skipped. With no
    tokens at all the result is ``[<eos>]`` attributed to speaker 0.
    """
    ordered = sorted((s for s in segments if s.tokens), key=lambda s: s.start)
    tokens: List[int] = []
    speakers: List[int] = []
    timings: List[Optional[FrameSpan]] = []
    for i, segment in enumerate(ordered):
        if i > 0:
            tokens.append(vocab.sc_id)
            speakers.append(segment.speaker)
            timings.append(None)
        tokens.extend(segment.tokens)
        speakers.extend([segment.speaker] * len(segment.tokens))
        if segment.timings is not None:
            timings.extend(tuple(span) for span in segment.timings)
        else:
            timings.extend([None] * len(segment.tokens))
    tokens.append(vocab.eos_id)
    speakers.append(ordered[-1].speaker if ordered else 0)
    timings.append(None)
    return SerializedReference(tokens=tokens, speakers=speakers, timings=timings)


def deserialize_sot(
    tokens: Sequence[int],
    speakers: Sequence[int],
    vocab: Vocabulary,
) -> List[Tuple[int, List[int]]]:
    """Split an SOT sequence back into ordered (speaker, tokens) segments.

    Decoding stops at the first ``<eos>``. A segment's speaker is the most
    frequent per-token speaker, lowest index on ties.
    """
    segments: List[Tuple[int, List[int]]] = []
    current: List[int] = []
    current_speakers: List[int] = []

    def flush() -> None:
        if current:
            counts = Counter(current_speakers)
            best = max(counts.values())
            speaker = min(s for s, c in counts.items() if c == best)
            segments.append((speaker, list(current)))
        current.clear()
        current_speakers.clear()

    for token, speaker in zip(tokens, speakers):
        if token == vocab.eos_id:
            break
        if token == vocab.sc_id:
            flush()
            continue
        current.append(token)
        current_speakers.append(speaker)
    flush()
    return segments


def group_by_speaker(segments: Sequence[Tuple[int, List[int]]]) -> Dict[int, List[int]]:
    """Concatenate each speaker's segments in sequence order."""
    grouped: Dict[int, List[int]] = {}
    for speaker, tokens in segments:
        grouped.setdefault(speaker, []).extend(tokens)
    return grouped
