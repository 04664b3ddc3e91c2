"""Speaker-attributed transcript JSON.

Format: ``{speaker: [{"token": str, "start": float, "end": float}, ...]}``
with each speaker's tokens in start order.
"""

from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

from diarlite.errors import DataError
from diarlite.model.vocab import tokens_to_words
from diarlite.pipeline.segments import TimedToken
from diarlite.utils.fileio import read_json, write_json

Transcript = Dict[str, List[TimedToken]]


def group_tokens(tokens: Iterable[TimedToken]) -> Transcript:
    """Group timed tokens per speaker, ordered by start time."""
    grouped: Transcript = defaultdict(list)
    for token in tokens:
        grouped[token.speaker].append(token)
    return {
        spk: sorted(items, key=lambda t: (t.start, t.end))
        for spk, items in sorted(grouped.items())
    }


def transcript_to_json(transcript: Transcript) -> Dict[str, Any]:
    return {
        spk: [{"token": t.token, "start": t.start, "end": t.end} for t in tokens]
        for spk, tokens in transcript.items()
    }


def transcript_from_json(payload: Any) -> Transcript:
    """Rebuild a transcript from parsed JSON.

    Raises:
        DataError: If the payload does not follow the transcript format.
    """
    if not isinstance(payload, dict):
        raise DataError("Transcript JSON must be an object keyed by speaker")
    transcript: Transcript = {}
    for speaker, entries in payload.items():
        try:
            transcript[speaker] = [
                TimedToken(str(e["token"]), speaker, float(e["start"]), float(e["end"]))
                for e in entries
            ]
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"Bad transcript entry for speaker '{speaker}': {e}") from e
    return transcript


def write_transcript(path: Union[str, Path], transcript: Transcript) -> Path:
    return write_json(path, transcript_to_json(transcript))


def read_transcript(path: Union[str, Path]) -> Transcript:
    return transcript_from_json(read_json(path))


def transcript_words(transcript: Transcript) -> Dict[str, List[str]]:
    """Per-speaker word sequences for cpWER."""
    return {
        spk: tokens_to_words(t.token for t in tokens)
        for spk, tokens in transcript.items()
    }
