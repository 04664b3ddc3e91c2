"""Mixing rendered utterances into multi-talker samples."""

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from diarlite.alignment.timing import map_reference_frames
from diarlite.errors import DataError
from diarlite.model.layers import SUBSAMPLE_FACTOR
from diarlite.model.sot import SotSegment, serialize_sot
from diarlite.model.types import AcousticFeatures, ProfileSet, SerializedReference
from diarlite.model.vocab import Vocabulary, tokens_to_words
from diarlite.pipeline.segments import (
    DiarSegment,
    TimedToken,
    merge_tokens,
    segments_as_tokens,
)
from diarlite.synth.inventory import SpeakerInventory
from diarlite.synth.render import RenderedUtterance

MAX_UTTERANCES = 5

# Spans closer than this count as touching.
_TOUCHING_SEC = 1e-9


@dataclass
class OverlapPolicy:
    """Onset policy for consecutive utterances.

    With probability ``overlap_prob`` the next utterance starts inside the
    previous one; otherwise it follows after a uniform 0 to ``max_gap_sec``
    silence. Utterances of one speaker never overlap each other.
    """

    overlap_prob: float = 0.9
    max_gap_sec: float = 1.0


@dataclass
class PlacedUtterance:
    utterance: RenderedUtterance
    offset: int


@dataclass
class UtteranceInfo:
    """Metadata of one utterance inside a mixture (absolute seconds)."""

    speaker_id: str
    offset: float
    duration: float
    token_ids: List[int]
    token_times: List[List[float]]

    @property
    def end(self) -> float:
        return self.offset + self.duration


@dataclass
class MixtureSample:
    """Mixed features with their SOT reference and the profiles offered to the model."""

    recording_id: str
    features: AcousticFeatures
    reference: SerializedReference
    profile_set: ProfileSet
    utterances: List[UtteranceInfo]
    condition: Optional[str] = None
    speaker_ids: List[str] = field(default_factory=list)

    def reference_segments(self) -> List[DiarSegment]:
        """Utterance spans per speaker, joining touching or overlapping spans."""
        spans = [DiarSegment(u.speaker_id, u.offset, u.end) for u in self.utterances]
        return merge_tokens(segments_as_tokens(spans), merge_gap=_TOUCHING_SEC)

    def reference_tokens(self, vocab: Vocabulary) -> Dict[str, List[TimedToken]]:
        """Timed tokens per speaker, in utterance order."""
        tokens: Dict[str, List[TimedToken]] = defaultdict(list)
        for u in sorted(self.utterances, key=lambda u: u.offset):
            for token_id, (start, end) in zip(u.token_ids, u.token_times):
                tokens[u.speaker_id].append(
                    TimedToken(vocab.tokens[token_id], u.speaker_id, start, end)
                )
        return dict(tokens)

    def reference_words(self, vocab: Vocabulary) -> Dict[str, List[str]]:
        """Words per speaker for cpWER."""
        return {
            spk: tokens_to_words(t.token for t in toks)
            for spk, toks in self.reference_tokens(vocab).items()
        }


def place_utterances(
    utterances: Sequence[RenderedUtterance],
    rng: np.random.Generator,
    policy: OverlapPolicy,
    frame_period: float = 0.01,
) -> List[int]:
    """Draw frame offsets for utterances in the given order.

    An overlapping onset falls inside the previous utterance, late enough
    that the new utterance outlasts it and after the end of its own
    speaker's last utterance. Ends therefore increase strictly, and the
    overlap draw always succeeds when consecutive speakers differ.
    """
    offsets: List[int] = []
    speaker_end: Dict[int, int] = {}
    for i, utt in enumerate(utterances):
        if i == 0:
            offsets.append(0)
        else:
            prev = utterances[i - 1]
            prev_start = offsets[-1]
            prev_end = prev_start + prev.num_frames
            own_end = speaker_end.get(utt.speaker, 0)
            lo = max(prev_start + 1, prev_end - utt.num_frames + 1, own_end)
            hi = prev_end - 1
            overlap = rng.random() < policy.overlap_prob
            if overlap and utt.speaker != prev.speaker and lo <= hi:
                offsets.append(int(rng.integers(lo, hi + 1)))
            else:
                gap = int(round(rng.uniform(0.0, policy.max_gap_sec) / frame_period))
                offsets.append(max(prev_end + gap, own_end))
        speaker_end[utt.speaker] = offsets[-1] + utt.num_frames
    return offsets


def mix_placed(
    placed: Sequence[PlacedUtterance],
    profile_set: ProfileSet,
    speaker_ids: Sequence[str],
    vocab: Vocabulary,
    recording_id: str = "mix",
    frame_period: float = 0.01,
) -> MixtureSample:
    """Sum placed utterances and build the SOT reference.

    Utterances are summed in (offset, speaker) order, so the input order does
    not change the result.

    Args:
        placed: Utterances with frame offsets.
        profile_set: Profiles offered to the model; must contain every
            speaker in ``speaker_ids`` for the utterances used.
        speaker_ids: Inventory index -> speaker id.
        vocab: Vocabulary.
        recording_id: Sample id.
        frame_period: Seconds per frame.

    Raises:
        DataError: If nothing is placed or a speaker lacks a profile.
    """
    if not placed:
        raise DataError("Nothing to mix")
    ordered = sorted(
        placed, key=lambda p: (p.offset, p.utterance.speaker, p.utterance.token_ids)
    )
    total = max(p.offset + p.utterance.num_frames for p in ordered)
    dim = ordered[0].utterance.frames.shape[1]
    canvas = np.zeros((total, dim), dtype=np.float64)
    for p in ordered:
        canvas[p.offset : p.offset + p.utterance.num_frames] += p.utterance.frames

    encoder_length = math.ceil(total / SUBSAMPLE_FACTOR)
    segments: List[SotSegment] = []
    infos: List[UtteranceInfo] = []
    for p in ordered:
        utt = p.utterance
        speaker_id = speaker_ids[utt.speaker]
        start = p.offset * frame_period
        times = [(start + s, start + e) for s, e in utt.token_times]
        segments.append(
            SotSegment(
                speaker=profile_set.index_of(speaker_id),
                tokens=list(utt.token_ids),
                start=start,
                timings=map_reference_frames(
                    times, frame_period, SUBSAMPLE_FACTOR, encoder_length
                ),
            )
        )
        infos.append(
            UtteranceInfo(
                speaker_id=speaker_id,
                offset=start,
                duration=utt.num_frames * frame_period,
                token_ids=list(utt.token_ids),
                token_times=[[s, e] for s, e in times],
            )
        )
    reference = serialize_sot(segments, vocab)
    reference.validate(
        vocab.eos_id,
        vocab.sc_id,
        num_speakers=len(profile_set),
        encoder_length=encoder_length,
    )
    return MixtureSample(
        recording_id=recording_id,
        features=AcousticFeatures(canvas, frame_period),
        reference=reference,
        profile_set=profile_set,
        utterances=infos,
        speaker_ids=sorted({i.speaker_id for i in infos}),
    )


def build_profile_set(
    speakers: Sequence[int],
    inventory: SpeakerInventory,
    rng: np.random.Generator,
    num_distractors: int = 0,
    profile_fn: Optional[Callable[[int], np.ndarray]] = None,
) -> ProfileSet:
    """Profiles of the given speakers plus distractors, in shuffled order."""
    chosen = list(dict.fromkeys(speakers))
    others = [i for i in range(len(inventory)) if i not in chosen]
    count = min(num_distractors, len(others))
    if count:
        chosen += [int(i) for i in rng.choice(others, size=count, replace=False)]
    order = rng.permutation(len(chosen))
    profile = profile_fn or inventory.profile
    members = [chosen[i] for i in order]
    return ProfileSet.from_arrays(
        [inventory.ids[i] for i in members], np.stack([profile(i) for i in members])
    )


def mix_utterances(
    utterances: Sequence[RenderedUtterance],
    inventory: SpeakerInventory,
    vocab: Vocabulary,
    rng: np.random.Generator,
    policy: Optional[OverlapPolicy] = None,
    num_distractors: int = 0,
    background_noise_std: float = 0.0,
    recording_id: str = "mix",
    profile_fn: Optional[Callable[[int], np.ndarray]] = None,
) -> MixtureSample:
    """Mix 1 to 5 utterances with random onsets.

    Raises:
        DataError: On no utterances or more than five.
    """
    if not utterances:
        raise DataError("A mixture needs at least one utterance")
    if len(utterances) > MAX_UTTERANCES:
        raise DataError(
            f"At most {MAX_UTTERANCES} utterances per mixture, got {len(utterances)}"
        )
    policy = policy or OverlapPolicy()
    frame_period = utterances[0].frame_period
    offsets = place_utterances(utterances, rng, policy, frame_period)
    profile_set = build_profile_set(
        [u.speaker for u in utterances], inventory, rng, num_distractors, profile_fn
    )
    sample = mix_placed(
        [PlacedUtterance(u, o) for u, o in zip(utterances, offsets)],
        profile_set,
        inventory.ids,
        vocab,
        recording_id=recording_id,
        frame_period=frame_period,
    )
    return add_background_noise(sample, rng, background_noise_std)


def add_background_noise(
    sample: MixtureSample, rng: np.random.Generator, noise_std: float
) -> MixtureSample:
    """Add stationary Gaussian noise over the whole sample."""
    if noise_std <= 0:
        return sample
    clean = sample.features.frames
    frames = clean + rng.normal(0.0, noise_std, size=clean.shape)
    sample.features = AcousticFeatures(frames, sample.features.frame_period)
    return sample
