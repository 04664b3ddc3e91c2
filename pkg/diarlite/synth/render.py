"""Rendering token sequences into synthetic feature frames.

A frame is the speaker signature plus the token pattern under a half-sine
envelope plus Gaussian noise. Every subword of a word lasts the same number
of frames, drawn per word.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from diarlite.alignment.timing import split_word_timing
from diarlite.errors import DataError
from diarlite.model.vocab import Vocabulary
from diarlite.synth.inventory import SpeakerInventory


@dataclass
class RenderedUtterance:
    """One speaker's rendered utterance with exact alignments.

    ``token_times`` and ``word_times`` are in seconds from the utterance start.
    """

    speaker: int
    token_ids: List[int]
    frames: np.ndarray
    token_times: List[Tuple[float, float]]
    word_times: List[Tuple[float, float]]
    frame_period: float = 0.01

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def duration(self) -> float:
        return self.num_frames * self.frame_period


def group_words(token_ids: Sequence[int], vocab: Vocabulary) -> List[List[int]]:
    """Split token ids into words at word-start subwords."""
    words: List[List[int]] = []
    for token in token_ids:
        if vocab.is_word_start(token) or not words:
            words.append([token])
        else:
            words[-1].append(token)
    return words


def token_envelope(length: int) -> np.ndarray:
    """Half-sine envelope over ``length`` frames."""
    return np.sin(np.pi * (np.arange(length) + 0.5) / length)


def render_utterance(
    inventory: SpeakerInventory,
    speaker: int,
    token_ids: Sequence[int],
    vocab: Vocabulary,
    rng: np.random.Generator,
    noise_std: float = 0.1,
    min_token_frames: int = 3,
    max_token_frames: int = 10,
    frames_per_token: Optional[int] = None,
    frame_period: float = 0.01,
) -> RenderedUtterance:
    """Render a token sequence for one speaker.

    Args:
        inventory: Speaker signatures and token patterns.
        speaker: Inventory index of the speaker.
        token_ids: Non-special token ids.
        vocab: Vocabulary, used to group subwords into words.
        rng: Random source for durations and noise.
        noise_std: Standard deviation of the additive frame noise.
        min_token_frames: Shortest subword duration in frames.
        max_token_frames: Longest subword duration in frames.
        frames_per_token: Fixed subword duration; overrides the random draw.
        frame_period: Seconds per frame.

    Returns:
        The rendered utterance.

    Raises:
        DataError: On an empty token list, a special token or a bad speaker.
    """
    if len(token_ids) == 0:
        raise DataError("Cannot render an empty token list")
    if not 0 <= speaker < len(inventory):
        raise DataError(
            f"Speaker index {speaker} outside inventory of {len(inventory)}"
        )
    for token in token_ids:
        if not 0 <= token < len(vocab) or vocab.is_special(token):
            raise DataError(f"Token id {token} is not a regular vocabulary token")

    signature = inventory.signatures[speaker]
    blocks: List[np.ndarray] = []
    token_times: List[Tuple[float, float]] = []
    word_times: List[Tuple[float, float]] = []
    cursor = 0
    for word in group_words(token_ids, vocab):
        length = frames_per_token or int(
            rng.integers(min_token_frames, max_token_frames + 1)
        )
        envelope = token_envelope(length)[:, None]
        for token in word:
            pattern = inventory.patterns[token][None, :]
            blocks.append(signature[None, :] + pattern * envelope)
        word_start = cursor * frame_period
        cursor += length * len(word)
        word_end = cursor * frame_period
        word_times.append((word_start, word_end))
        token_times.extend(split_word_timing(word_start, word_end, len(word)))

    frames = np.concatenate(blocks, axis=0)
    if noise_std > 0:
        frames = frames + rng.normal(0.0, noise_std, size=frames.shape)
    return RenderedUtterance(
        speaker=speaker,
        token_ids=list(token_ids),
        frames=frames,
        token_times=token_times,
        word_times=word_times,
        frame_period=frame_period,
    )


def random_words(
    vocab: Vocabulary, rng: np.random.Generator, num_words: int
) -> List[int]:
    """Draw ``num_words`` words of one or two subwords."""
    starts = vocab.word_start_ids
    continuations = vocab.continuation_ids
    tokens: List[int] = []
    for _ in range(num_words):
        tokens.append(int(rng.choice(starts)))
        if continuations and rng.random() < 0.5:
            tokens.append(int(rng.choice(continuations)))
    return tokens
