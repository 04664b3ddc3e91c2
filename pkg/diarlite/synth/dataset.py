"""Synthetic training and evaluation corpora.

A dataset directory holds::

    inventory.npz          speakers, token patterns, profile projection
    vocab.txt              token list
    <split>.jsonl          manifest, one sample per line
    <split>/<id>.f32       features
    <split>/<id>.rttm      reference segments
    <split>/<id>.json      reference transcript
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from diarlite.errors import ConfigError, DataError
from diarlite.model.types import AcousticFeatures, ProfileSet, SerializedReference
from diarlite.model.vocab import Vocabulary
from diarlite.synth.features_io import read_features, write_features
from diarlite.synth.inventory import (
    SpeakerInventory,
    extract_profile,
    load_inventory,
    save_inventory,
)
from diarlite.synth.mixer import (
    MixtureSample,
    OverlapPolicy,
    PlacedUtterance,
    UtteranceInfo,
    add_background_noise,
    mix_placed,
    mix_utterances,
)
from diarlite.synth.render import RenderedUtterance, random_words, render_utterance
from diarlite.utils.config import ModelConfig, SynthConfig
from diarlite.utils.fileio import read_jsonl, write_jsonl
from diarlite.utils.formatters import round_floats
from diarlite.utils.rttm import write_rttm
from diarlite.utils.transcripts import group_tokens, write_transcript

logger = logging.getLogger(__name__)

INVENTORY_FILE = "inventory.npz"
VOCAB_FILE = "vocab.txt"
TRAIN_SPLIT = "train"
EVAL_SPLIT = "eval"

OVERLAP_CONDITIONS = ("0S", "0L", "10", "20", "30", "40")
_GAP_RANGES = {"0S": (0.1, 0.5), "0L": (2.9, 3.0)}
# Keeps evaluation draws disjoint from training draws under one seed.
_EVAL_SEED_OFFSET = 1_000_000
_ENROLLMENT_WORDS = 4


@dataclass
class DatasetEntry:
    """One manifest line, with features loaded on demand."""

    recording_id: str
    features_path: Path
    rttm_path: Path
    transcript_path: Path
    num_frames: int
    reference: SerializedReference
    profile_set: ProfileSet
    utterances: List[UtteranceInfo]
    condition: Optional[str] = None
    frame_period: float = 0.01

    def load_features(self) -> AcousticFeatures:
        return read_features(self.features_path, self.frame_period)


class DatasetBuilder:
    """Draws reproducible mixtures for one synthesis configuration.

    Sample ``i`` uses a generator seeded with ``seed + i``, so samples can be
    drawn in any order or in parallel.
    """

    def __init__(
        self,
        synth: SynthConfig,
        model: ModelConfig,
        vocab: Optional[Vocabulary] = None,
        inventory: Optional[SpeakerInventory] = None,
    ) -> None:
        self.synth = synth
        self.frame_period = model.frame_period
        self.vocab = vocab or Vocabulary.default()
        self.inventory = inventory or SpeakerInventory.generate(
            num_speakers=synth.inventory_size,
            feat_dim=model.feat_dim,
            profile_dim=model.profile_dim,
            vocab_size=len(self.vocab),
            seed=synth.seed,
            signature_scale=synth.signature_scale,
            pattern_scale=synth.pattern_scale,
            max_cosine=synth.max_signature_cosine,
        )
        if self.inventory.feat_dim != model.feat_dim:
            raise ConfigError(
                f"Inventory feature dim {self.inventory.feat_dim} != model feat_dim "
                f"{model.feat_dim}"
            )

    def _render(
        self, speaker: int, rng: np.random.Generator, num_words: int
    ) -> RenderedUtterance:
        return render_utterance(
            self.inventory,
            speaker,
            random_words(self.vocab, rng, num_words),
            self.vocab,
            rng,
            noise_std=self.synth.noise_std,
            min_token_frames=self.synth.min_token_frames,
            max_token_frames=self.synth.max_token_frames,
            frame_period=self.frame_period,
        )

    def enrollment_profile(self, speaker: int, rng: np.random.Generator) -> np.ndarray:
        """Profile extracted from a fresh single-speaker render."""
        utt = self._render(speaker, rng, _ENROLLMENT_WORDS)
        return extract_profile(utt.frames, self.inventory.projection)

    def _speaker_sequence(
        self, rng: np.random.Generator, num_speakers: int, num_utterances: int
    ) -> List[int]:
        """Inventory speakers per utterance.

        Every chosen speaker appears and consecutive turns change speaker, so
        the overlap policy can apply to every consecutive pair. A single
        speaker gets a single utterance.
        """
        chosen = [
            int(s)
            for s in rng.choice(len(self.inventory), size=num_speakers, replace=False)
        ]
        turns = [chosen[i] for i in rng.permutation(num_speakers)]
        if num_speakers == 1:
            return turns
        for _ in range(num_utterances - num_speakers):
            options = [
                (speaker, pos)
                for speaker in chosen
                for pos in range(len(turns) + 1)
                if (pos == 0 or turns[pos - 1] != speaker)
                and (pos == len(turns) or turns[pos] != speaker)
            ]
            speaker, pos = options[int(rng.integers(0, len(options)))]
            turns.insert(pos, speaker)
        return turns

    def _num_words(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.synth.min_words, self.synth.max_words + 1))

    def training_sample(self, index: int, seed: Optional[int] = None) -> MixtureSample:
        """Mixture of 1 to ``max_utterances`` utterances with distractor profiles."""
        rng = np.random.default_rng((self.synth.seed if seed is None else seed) + index)
        cfg = self.synth
        num_speakers = int(rng.integers(cfg.min_speakers, cfg.max_speakers + 1))
        num_utterances = int(rng.integers(num_speakers, cfg.max_utterances + 1))
        speakers = self._speaker_sequence(rng, num_speakers, num_utterances)
        utterances = [self._render(s, rng, self._num_words(rng)) for s in speakers]
        return mix_utterances(
            utterances,
            self.inventory,
            self.vocab,
            rng,
            policy=OverlapPolicy(cfg.overlap_prob, cfg.max_gap_sec),
            num_distractors=int(rng.integers(0, cfg.max_distractors + 1)),
            background_noise_std=cfg.background_noise_std,
            recording_id=f"train{index:06d}",
            profile_fn=lambda s: self.enrollment_profile(s, rng),
        )

    def eval_sample(
        self, index: int, condition: Optional[str] = None, seed: Optional[int] = None
    ) -> MixtureSample:
        """Held-out sample.

        Without a condition this is a training-recipe mixture without
        distractors. With a condition it is a longer session of
        ``eval_utterances`` utterances whose gaps or overlaps follow it.
        """
        base = (self.synth.seed if seed is None else seed) + _EVAL_SEED_OFFSET
        rng = np.random.default_rng(base + index)
        cfg = self.synth
        if condition is None:
            recording_id = f"eval{index:06d}"
        else:
            recording_id = f"eval{condition}_{index:06d}"
        if condition is None:
            num_speakers = int(rng.integers(cfg.min_speakers, cfg.max_speakers + 1))
            num_utterances = int(rng.integers(num_speakers, cfg.max_utterances + 1))
            speakers = self._speaker_sequence(rng, num_speakers, num_utterances)
            utterances = [self._render(s, rng, self._num_words(rng)) for s in speakers]
            return mix_utterances(
                utterances,
                self.inventory,
                self.vocab,
                rng,
                policy=OverlapPolicy(cfg.overlap_prob, cfg.max_gap_sec),
                background_noise_std=cfg.background_noise_std,
                recording_id=recording_id,
                profile_fn=lambda s: self.enrollment_profile(s, rng),
            )
        if condition not in OVERLAP_CONDITIONS:
            raise ConfigError(f"Unknown overlap condition '{condition}'")

        num_speakers = int(
            rng.integers(cfg.eval_min_speakers, cfg.eval_max_speakers + 1)
        )
        num_speakers = min(num_speakers, cfg.eval_utterances)
        speakers = self._session_speakers(rng, num_speakers, cfg.eval_utterances)
        utterances = [self._render(s, rng, self._num_words(rng)) for s in speakers]
        offsets = session_offsets(utterances, condition, rng, self.frame_period)
        chosen = list(dict.fromkeys(speakers))
        order = rng.permutation(len(chosen))
        members = [chosen[i] for i in order]
        profile_set = ProfileSet.from_arrays(
            [self.inventory.ids[s] for s in members],
            np.stack([self.enrollment_profile(s, rng) for s in members]),
        )
        sample = mix_placed(
            [PlacedUtterance(u, o) for u, o in zip(utterances, offsets)],
            profile_set,
            self.inventory.ids,
            self.vocab,
            recording_id=recording_id,
            frame_period=self.frame_period,
        )
        sample.condition = condition
        return add_background_noise(sample, rng, cfg.background_noise_std)

    def _session_speakers(
        self, rng: np.random.Generator, num_speakers: int, num_utterances: int
    ) -> List[int]:
        """Speaker turns where consecutive utterances change speaker when possible."""
        chosen = [
            int(s)
            for s in rng.choice(len(self.inventory), size=num_speakers, replace=False)
        ]
        turns = list(chosen[: min(num_speakers, num_utterances)])
        while len(turns) < num_utterances:
            candidates = [s for s in chosen if s != turns[-1]] or chosen
            turns.append(int(candidates[int(rng.integers(0, len(candidates)))]))
        return turns


def session_offsets(
    utterances: List[RenderedUtterance],
    condition: str,
    rng: np.random.Generator,
    frame_period: float = 0.01,
) -> List[int]:
    """Frame offsets realising an overlap condition.

    ``0S`` and ``0L`` insert 0.1-0.5 s and 2.9-3.0 s silences. A percentage
    ``r`` overlaps each utterance with its predecessor by ``r * d / (1 + r)``
    seconds, where ``d`` is the utterance's own duration, capped to leave at
    least one frame of the predecessor unshared.
    """
    offsets = [0]
    for prev, cur in zip(utterances, utterances[1:]):
        prev_start = offsets[-1]
        prev_end = prev_start + prev.num_frames
        if condition in _GAP_RANGES:
            low, high = _GAP_RANGES[condition]
            gap = int(round(rng.uniform(low, high) / frame_period))
            offsets.append(prev_end + gap)
            continue
        ratio = int(condition) / 100.0
        overlap = int(round(ratio * cur.num_frames / (1.0 + ratio)))
        overlap = min(overlap, prev.num_frames - 1)
        offsets.append(prev_end - overlap)
    return offsets


def sample_record(sample: MixtureSample, split: str) -> Dict[str, Any]:
    """Manifest line of a sample, with paths relative to the dataset root."""
    ref = sample.reference
    return {
        "id": sample.recording_id,
        "features": f"{split}/{sample.recording_id}.f32",
        "rttm": f"{split}/{sample.recording_id}.rttm",
        "transcript": f"{split}/{sample.recording_id}.json",
        "num_frames": sample.features.num_frames,
        "frame_period": sample.features.frame_period,
        "condition": sample.condition,
        "tokens": list(ref.tokens),
        "speakers": list(ref.speakers),
        "timings": [None if t is None else [int(t[0]), int(t[1])] for t in ref.timings],
        "profile_ids": sample.profile_set.ids,
        "profiles": sample.profile_set.matrix.tolist(),
        "utterances": [
            {
                "speaker": u.speaker_id,
                "offset": u.offset,
                "duration": u.duration,
                "tokens": u.token_ids,
                "times": u.token_times,
            }
            for u in sample.utterances
        ],
    }


def write_dataset(
    samples: Iterable[MixtureSample],
    out_dir: Union[str, Path],
    split: str,
    vocab: Vocabulary,
    inventory: SpeakerInventory,
) -> Path:
    """Write samples, their side files and the split manifest.

    Returns:
        Path of the manifest.
    """
    root = Path(out_dir)
    save_inventory(inventory, root / INVENTORY_FILE)
    vocab.save(root / VOCAB_FILE)
    records = []
    for sample in samples:
        stem = root / split / sample.recording_id
        write_features(stem.with_suffix(".f32"), sample.features)
        write_rttm(
            stem.with_suffix(".rttm"), sample.reference_segments(), sample.recording_id
        )
        tokens = [t for toks in sample.reference_tokens(vocab).values() for t in toks]
        write_transcript(stem.with_suffix(".json"), group_tokens(tokens))
        records.append(round_floats(sample_record(sample, split)))
    manifest = write_jsonl(root / f"{split}.jsonl", records)
    logger.info("Wrote %d %s samples to %s", len(records), split, root)
    return manifest


def _entry(root: Path, record: Dict[str, Any], line_no: int) -> DatasetEntry:
    try:
        timings: List[Optional[Tuple[int, int]]] = [
            None if t is None else (int(t[0]), int(t[1])) for t in record["timings"]
        ]
        return DatasetEntry(
            recording_id=record["id"],
            features_path=root / record["features"],
            rttm_path=root / record["rttm"],
            transcript_path=root / record["transcript"],
            num_frames=int(record["num_frames"]),
            reference=SerializedReference(
                tokens=[int(t) for t in record["tokens"]],
                speakers=[int(s) for s in record["speakers"]],
                timings=timings,
            ),
            profile_set=ProfileSet.from_arrays(
                record["profile_ids"], np.asarray(record["profiles"])
            ),
            utterances=[
                UtteranceInfo(
                    speaker_id=u["speaker"],
                    offset=float(u["offset"]),
                    duration=float(u["duration"]),
                    token_ids=[int(t) for t in u["tokens"]],
                    token_times=[[float(s), float(e)] for s, e in u["times"]],
                )
                for u in record["utterances"]
            ],
            condition=record.get("condition"),
            frame_period=float(record.get("frame_period", 0.01)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"Manifest line {line_no}: {e}") from e


def load_dataset(
    data_dir: Union[str, Path], split: str = TRAIN_SPLIT
) -> List[DatasetEntry]:
    """Read a split manifest.

    Raises:
        DataError: If the manifest is missing or malformed.
    """
    root = Path(data_dir)
    manifest = root / f"{split}.jsonl"
    if not manifest.exists():
        raise DataError(
            f"No {split} manifest at {manifest}; run 'diarlite synth' first"
        )
    records = read_jsonl(manifest)
    return [_entry(root, record, i) for i, record in enumerate(records, start=1)]


def load_dataset_assets(
    data_dir: Union[str, Path],
) -> Tuple[Vocabulary, SpeakerInventory]:
    root = Path(data_dir)
    if not (root / VOCAB_FILE).exists():
        raise DataError(f"No vocabulary at {root / VOCAB_FILE}")
    return Vocabulary.load(root / VOCAB_FILE), load_inventory(root / INVENTORY_FILE)


def _draw(fn, indices: List[int], jobs: int, desc: str) -> List[MixtureSample]:
    with tqdm(total=len(indices), desc=desc, disable=None) as bar:
        if jobs <= 1:
            samples = []
            for i in indices:
                samples.append(fn(i))
                bar.update(1)
            return samples
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            samples = []
            for sample in pool.map(fn, indices):
                samples.append(sample)
                bar.update(1)
            return samples


def build_training_set(
    n_samples: int,
    synth: SynthConfig,
    model: ModelConfig,
    seed: Optional[int] = None,
    jobs: int = 1,
    builder: Optional[DatasetBuilder] = None,
) -> List[MixtureSample]:
    """Draw ``n_samples`` training mixtures.

    Raises:
        ConfigError: If ``n_samples`` is below one.
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples must be at least 1, got {n_samples}")
    builder = builder or DatasetBuilder(synth, model)
    return _draw(
        lambda i: builder.training_sample(i, seed),
        list(range(n_samples)),
        jobs,
        "synth train",
    )


def build_eval_set(
    n_samples: int,
    synth: SynthConfig,
    model: ModelConfig,
    condition: Optional[str] = None,
    seed: Optional[int] = None,
    jobs: int = 1,
    builder: Optional[DatasetBuilder] = None,
) -> List[MixtureSample]:
    """Draw ``n_samples`` held-out samples, optionally under an overlap condition."""
    if n_samples < 1:
        raise ConfigError(f"n_samples must be at least 1, got {n_samples}")
    builder = builder or DatasetBuilder(synth, model)
    return _draw(
        lambda i: builder.eval_sample(i, condition, seed),
        list(range(n_samples)),
        jobs,
        "synth eval",
    )
