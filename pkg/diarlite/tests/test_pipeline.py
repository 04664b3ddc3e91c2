"""Tests for VAD, windowing, chunking, segment merging and the full pipeline."""

import numpy as np
import pytest

from diarlite.errors import ConfigError, DataError
from diarlite.model.types import AcousticFeatures, ProfileSet
from diarlite.pipeline.chunking import Chunk, chunk_audio, split_evenly
from diarlite.pipeline.diarize import decode_chunk, diarize_recording
from diarlite.pipeline.embeddings import tile_region, window_embeddings
from diarlite.pipeline.segments import (
    DiarSegment,
    TimedToken,
    is_abnormal,
    merge_tokens,
    segments_as_tokens,
    segments_by_speaker,
    tokens_to_segments,
)
from diarlite.pipeline.vad import SpeechRegion, detect_speech, frame_runs
from diarlite.utils.config import PipelineConfig
from diarlite.utils.rttm import emit_rttm, parse_rttm


def _loud(pattern, dim=4):
    """Frames of norm 2 where ``pattern`` is 1 and silence elsewhere."""
    frames = np.zeros((len(pattern), dim))
    frames[np.asarray(pattern, dtype=bool), 0] = 2.0
    return AcousticFeatures(frames)


def _tok(speaker, start, end, token="▁cat"):
    return TimedToken(token, speaker, start, end)


class TestVad:
    def test_frame_runs(self):
        assert frame_runs(np.array([0, 1, 1, 0, 1], dtype=bool)) == [[1, 3], [4, 5]]
        assert frame_runs(np.zeros(3, dtype=bool)) == []

    def test_regions_in_seconds(self):
        regions = detect_speech(_loud([0] * 10 + [1] * 20 + [0] * 50 + [1] * 10))
        assert [(r.start, r.end) for r in regions] == [
            (pytest.approx(0.10), pytest.approx(0.30)),
            (pytest.approx(0.80), pytest.approx(0.90)),
        ]

    def test_short_silence_is_bridged(self):
        loud = _loud([1] * 10 + [0] * 20 + [1] * 10)
        regions = detect_speech(loud, min_silence_sec=0.3)
        assert len(regions) == 1
        assert regions[0].end == pytest.approx(0.40)

    def test_silence(self):
        assert detect_speech(AcousticFeatures(np.zeros((50, 4)))) == []

    def test_threshold(self):
        assert detect_speech(_loud([1] * 5), energy_threshold=2.5) == []

    def test_bad_region(self):
        with pytest.raises(DataError):
            SpeechRegion(1.0, 1.0)


class TestWindows:
    def test_full_windows(self):
        assert tile_region(0, 10, 4, 2) == [(0, 4), (2, 6), (4, 8), (6, 10)]

    def test_partial_tail_kept(self):
        assert tile_region(0, 11, 4, 2)[-1] == (8, 11)

    def test_short_region_gets_one_window(self):
        assert tile_region(5, 8, 4, 2) == [(5, 8)]

    def test_tiny_region_is_skipped(self):
        assert tile_region(0, 1, 4, 2) == []

    def test_embeddings_are_unit(self, inventory, make_utterance):
        utt = make_utterance(0, words=("▁cat", "s", "▁dog"), frames_per_token=10)
        features = AcousticFeatures(utt.frames)
        windows = window_embeddings(
            features, [SpeechRegion(0.0, 0.3)], inventory.projection, 0.1, 0.05
        )
        assert len(windows) == 5
        assert windows[0].center == pytest.approx(0.05)
        for w in windows:
            assert np.linalg.norm(w.vector) == pytest.approx(1.0)

    def test_bad_hop(self, inventory):
        features = AcousticFeatures(np.ones((20, 8)))
        with pytest.raises(ConfigError):
            window_embeddings(
                features, [SpeechRegion(0.0, 0.2)], inventory.projection, 0.1, 0.2
            )


class TestChunking:
    def test_cut_in_silence_middle(self):
        chunks = chunk_audio([SpeechRegion(0.0, 1.0), SpeechRegion(3.0, 4.0)])
        assert chunks == [Chunk(0.0, 2.0), Chunk(2.0, 4.0)]

    def test_long_chunk_split_evenly(self):
        chunks = chunk_audio([SpeechRegion(0.0, 50.0)], max_chunk_sec=20.0)
        assert len(chunks) == 3
        assert all(c.duration == pytest.approx(50.0 / 3) for c in chunks)

    def test_exact_multiple_not_split_further(self):
        assert len(split_evenly(0.0, 40.0, 20.0)) == 2

    def test_no_regions(self):
        assert chunk_audio([]) == []

    def test_bad_length(self):
        with pytest.raises(ConfigError):
            chunk_audio([SpeechRegion(0.0, 1.0)], max_chunk_sec=0)


class TestTokensToSegments:
    def test_merge_within_gap(self):
        tokens = [_tok("A", 0.0, 0.5), _tok("A", 1.0, 1.4), _tok("A", 5.0, 5.5)]
        segments = tokens_to_segments(tokens, merge_gap=2.0)
        assert segments == [DiarSegment("A", 0.0, 1.4), DiarSegment("A", 5.0, 5.5)]

    def test_gap_equal_to_threshold_splits(self):
        tokens = [_tok("A", 0.0, 1.0), _tok("A", 3.0, 3.5)]
        segments = tokens_to_segments(tokens, merge_gap=2.0)
        assert len(segments) == 2

    def test_speakers_are_separate(self):
        segments = tokens_to_segments([_tok("B", 0.2, 0.6), _tok("A", 0.0, 0.5)])
        assert [s.speaker for s in segments] == ["A", "B"]

    def test_abnormal_tokens_dropped(self):
        tokens = [_tok("A", 1.0, 0.5), _tok("A", 0.0, 2.5), _tok("A", 4.0, 4.2)]
        segments = tokens_to_segments(tokens, max_token_dur=2.0)
        assert segments == [DiarSegment("A", 4.0, 4.2)]

    def test_is_abnormal(self):
        assert is_abnormal(_tok("A", 0.0, 2.0), 2.0)
        assert not is_abnormal(_tok("A", 0.0, 1.99), 2.0)

    def test_zero_length_token_makes_no_segment(self):
        assert tokens_to_segments([_tok("A", 1.0, 1.0)]) == []

    def test_merged_output_is_stable(self):
        tokens = [_tok("A", 0.0, 0.5), _tok("A", 1.0, 1.5), _tok("A", 2.0, 2.6)]
        segments = tokens_to_segments(tokens, merge_gap=2.0, max_token_dur=2.0)
        assert segments == [DiarSegment("A", 0.0, 2.6)]
        again = tokens_to_segments(
            segments_as_tokens(segments), merge_gap=2.0, max_token_dur=2.0
        )
        assert again == segments

    def test_merged_tokens_are_never_abnormal(self):
        long = TimedToken("", "A", 0.0, 9.0, merged=True)
        assert not is_abnormal(long, 2.0)
        assert is_abnormal(TimedToken("", "A", 9.0, 0.0, merged=True), 2.0)

    def test_merge_tokens_gap(self):
        merged = merge_tokens([_tok("A", 0.0, 1.0), _tok("A", 1.5, 6.0)], merge_gap=1.0)
        assert merged == [DiarSegment("A", 0.0, 6.0)]
        with pytest.raises(DataError):
            merge_tokens([], merge_gap=-1.0)

    def test_unsorted_input(self):
        segments = tokens_to_segments([_tok("A", 1.0, 1.5), _tok("A", 0.0, 0.4)])
        assert segments == [DiarSegment("A", 0.0, 1.5)]

    def test_bad_parameters(self):
        with pytest.raises(DataError):
            tokens_to_segments([], merge_gap=0.0)

    def test_segments_by_speaker(self):
        grouped = segments_by_speaker(
            [DiarSegment("B", 2.0, 3.0), DiarSegment("B", 0.0, 1.0)]
        )
        assert [s.start for s in grouped["B"]] == [0.0, 2.0]

    def test_segment_validation(self):
        with pytest.raises(DataError):
            DiarSegment("A", 1.0, 0.5)
        with pytest.raises(DataError):
            DiarSegment("A", -0.1, 0.5)


class TestDecodeChunk:
    def test_times_are_offset_and_clamped(self, tiny_model, rng):
        out = tiny_model.asr_decoder.out
        out.weight.data[:] = 0.0
        out.bias.data[:] = 0.0
        out.bias.data[tiny_model.vocab.index("▁cat")] = 10.0
        features = AcousticFeatures(rng.standard_normal((120, 8)))
        profiles = ProfileSet.from_arrays(["spk0"], rng.standard_normal((1, 8)))
        chunk = Chunk(0.5, 1.0)
        tokens = decode_chunk(tiny_model, features, profiles, chunk)
        assert len(tokens) == tiny_model.config.max_decode_len
        for t in tokens:
            assert t.token == "▁cat"
            assert t.speaker == "spk0"
            assert chunk.start <= t.start <= chunk.end
            assert chunk.start <= t.end <= chunk.end

    def test_half_frame_bounds_snap_to_grid(self, tiny_model, rng):
        out = tiny_model.asr_decoder.out
        out.weight.data[:] = 0.0
        out.bias.data[:] = 0.0
        out.bias.data[tiny_model.vocab.index("▁cat")] = 10.0
        features = AcousticFeatures(rng.standard_normal((120, 8)))
        profiles = ProfileSet.from_arrays(["spk0", "spk1"], rng.standard_normal((2, 8)))
        chunk = Chunk(0.505, 0.995)
        tokens = decode_chunk(tiny_model, features, profiles, chunk)
        assert tokens
        period = features.frame_period
        for t in tokens:
            for time in (t.start, t.end):
                assert time / period == pytest.approx(round(time / period), abs=1e-6)
                assert chunk.start - period / 2 <= time <= chunk.end + period / 2
        segments = tokens_to_segments(tokens, merge_gap=0.05)
        text = emit_rttm(segments, "r")
        assert len(parse_rttm(text)) == len(segments)


class TestDiarizeRecording:
    def test_silence_gives_empty_result(
        self, tiny_model, inventory, toy_pipeline_config
    ):
        silence = AcousticFeatures(np.zeros((80, 8)))
        result = diarize_recording(
            silence, tiny_model, toy_pipeline_config, inventory.projection
        )
        assert result.segments == []
        assert result.tokens == []
        assert result.num_speakers == 0

    def test_oracle_count(self, tiny_model, builder):
        sample = builder.eval_sample(0, condition="0L")
        config = PipelineConfig(
            window_sec=0.05, hop_sec=0.03, kmeans_restarts=2, speaker_count=2
        )
        result = diarize_recording(
            sample.features,
            tiny_model,
            config,
            builder.inventory.projection,
            "eval",
            jobs=2,
        )
        assert len(result.regions) == 3
        assert len(result.chunks) == 3
        assert result.num_speakers == 2
        assert {t.speaker for t in result.tokens} <= {"spk0", "spk1"}
        assert set(result.transcript) == {t.speaker for t in result.tokens}
        for segment in result.segments:
            assert 0.0 <= segment.start < segment.end <= sample.features.duration

    def test_short_regions_use_region_embeddings(
        self, tiny_model, make_utterance, inventory
    ):
        utt = make_utterance(0, words=("▁cat",), frames_per_token=8)
        frames = np.concatenate([utt.frames, np.zeros((40, 8)), utt.frames])
        config = PipelineConfig(window_sec=1.0, hop_sec=0.5, kmeans_restarts=2)
        features = AcousticFeatures(frames)
        result = diarize_recording(features, tiny_model, config, inventory.projection)
        assert len(result.regions) == 2
        assert result.num_speakers == 1


@pytest.mark.parametrize("seed", range(100))
def test_merged_segments_keep_gap(seed):
    rng = np.random.default_rng(seed)
    tokens = []
    for _ in range(int(rng.integers(1, 30))):
        start = float(rng.uniform(0.0, 30.0))
        end = start + rng.uniform(-0.5, 2.5)
        tokens.append(_tok(f"spk{int(rng.integers(3))}", start, end))
    for segments in segments_by_speaker(tokens_to_segments(tokens)).values():
        for before, after in zip(segments, segments[1:]):
            assert after.start - before.end >= 2.0


@pytest.mark.parametrize("seed", range(100))
def test_merging_twice_changes_nothing(seed):
    rng = np.random.default_rng(seed)
    tokens = []
    for _ in range(int(rng.integers(1, 30))):
        start = float(rng.uniform(0.0, 30.0))
        end = start + rng.uniform(0.0, 1.9)
        tokens.append(_tok(f"spk{int(rng.integers(3))}", start, end))
    segments = tokens_to_segments(tokens)
    assert tokens_to_segments(segments_as_tokens(segments)) == segments
