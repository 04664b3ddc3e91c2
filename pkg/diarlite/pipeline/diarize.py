"""End-to-end diarization of one recording.

VAD, window embeddings, spectral clustering, centroid profiles, chunked
speaker-attributed decoding and token-to-segment merging.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from diarlite.alignment.timing import clamp_times
from diarlite.model.sa_asr import SAASRModel
from diarlite.model.types import AcousticFeatures, ProfileSet
from diarlite.pipeline.chunking import Chunk, chunk_audio
from diarlite.pipeline.clustering import cluster_centroids, nme_spectral_cluster
from diarlite.pipeline.embeddings import WindowEmbedding, window_embeddings
from diarlite.pipeline.segments import DiarSegment, TimedToken, tokens_to_segments
from diarlite.pipeline.vad import SpeechRegion, detect_speech
from diarlite.synth.inventory import extract_profile
from diarlite.utils.config import PipelineConfig
from diarlite.utils.transcripts import Transcript, group_tokens

logger = logging.getLogger(__name__)


@dataclass
class DiarizationResult:
    recording_id: str
    segments: List[DiarSegment] = field(default_factory=list)
    tokens: List[TimedToken] = field(default_factory=list)
    regions: List[SpeechRegion] = field(default_factory=list)
    chunks: List[Chunk] = field(default_factory=list)
    profiles: Optional[ProfileSet] = None

    @property
    def num_speakers(self) -> int:
        return 0 if self.profiles is None else len(self.profiles)

    @property
    def transcript(self) -> Transcript:
        return group_tokens(self.tokens)


def _region_embeddings(
    features: AcousticFeatures, regions: List[SpeechRegion], projection: np.ndarray
) -> List[WindowEmbedding]:
    # Used when every region is too short for a window.
    period = features.frame_period
    out = []
    for region in regions:
        first = int(round(region.start / period))
        last = max(first + 1, min(features.num_frames, int(round(region.end / period))))
        vector = extract_profile(features.frames[first:last], projection)
        out.append(WindowEmbedding(region.start, region.end, vector))
    return out


def decode_chunk(
    model: SAASRModel, features: AcousticFeatures, profiles: ProfileSet, chunk: Chunk
) -> List[TimedToken]:
    """Decode one chunk and return its tokens on the recording's time axis.

    Token times are clamped to the chunk bounds snapped to the frame grid,
    so every time is a whole number of frames.
    """
    period = features.frame_period
    first = int(round(chunk.start / period))
    offset = first * period
    upper = int(round(chunk.end / period)) * period
    hyp = model.greedy_decode(features.slice_seconds(chunk.start, chunk.end), profiles)
    kept = [
        i for i, token in enumerate(hyp.tokens) if not model.vocab.is_special(token)
    ]
    times = clamp_times(
        [(offset + hyp.start_times[i], offset + hyp.end_times[i]) for i in kept],
        offset,
        upper,
    )
    tokens = [
        TimedToken(
            model.vocab.tokens[hyp.tokens[i]], profiles.ids[hyp.speakers[i]], start, end
        )
        for i, (start, end) in zip(kept, times)
    ]
    logger.debug(
        "Chunk [%.2f, %.2f] decoded %d tokens", chunk.start, chunk.end, len(tokens)
    )
    return tokens


def diarize_recording(
    features: AcousticFeatures,
    model: SAASRModel,
    config: PipelineConfig,
    projection: np.ndarray,
    recording_id: str = "rec",
    jobs: Optional[int] = None,
) -> DiarizationResult:
    """Diarize and transcribe one recording.

    Args:
        features: Recording features.
        model: Trained model, shared read-only across chunk workers.
        config: Pipeline settings; ``speaker_count`` selects oracle or
            estimated counting.
        projection: Embedding extractor projection.
        recording_id: Label carried into the result.
        jobs: Chunk decoding threads; defaults to ``config.jobs``.

    Returns:
        Segments and timed tokens; both empty when no speech is found.
    """
    result = DiarizationResult(recording_id)
    result.regions = detect_speech(
        features, config.energy_threshold, config.min_silence_sec
    )
    if not result.regions:
        logger.info("%s: no speech detected", recording_id)
        return result

    windows = window_embeddings(
        features, result.regions, projection, config.window_sec, config.hop_sec
    )
    if not windows:
        windows = _region_embeddings(features, result.regions, projection)
    vectors = np.stack([w.vector for w in windows])
    clusters = nme_spectral_cluster(
        vectors,
        num_speakers=config.oracle_speakers,
        max_speakers=config.max_speakers,
        max_p_ratio=config.max_p_ratio,
        single_speaker_cosine=config.single_speaker_cosine,
        restarts=config.kmeans_restarts,
        seed=config.seed,
    )
    result.profiles = cluster_centroids(vectors, clusters.labels)
    result.chunks = chunk_audio(result.regions, config.max_chunk_sec)
    logger.info(
        "%s: %d regions, %d windows, %d speakers, %d chunks",
        recording_id,
        len(result.regions),
        len(windows),
        len(result.profiles),
        len(result.chunks),
    )

    workers = config.jobs if jobs is None else jobs
    profiles = result.profiles

    def decode(chunk: Chunk) -> List[TimedToken]:
        return decode_chunk(model, features, profiles, chunk)

    if workers <= 1:
        per_chunk = [decode(c) for c in result.chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_chunk = list(pool.map(decode, result.chunks))
    result.tokens = [t for tokens in per_chunk for t in tokens]
    result.segments = tokens_to_segments(
        result.tokens, config.merge_gap_sec, config.max_token_dur_sec
    )
    return result
