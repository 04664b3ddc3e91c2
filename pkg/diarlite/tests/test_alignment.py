"""Tests for the time heads, time loss and timing conversions."""

import math

import numpy as np
import pytest

from diarlite.alignment.ctm import emit_ctm, parse_ctm
from diarlite.alignment.time_heads import (
    TimeHeads,
    TimeLogits,
    TimePosterior,
    time_attention,
    time_ce_loss,
    time_logits,
)
from diarlite.alignment.timing import (
    clamp_times,
    infer_token_times,
    map_reference_frames,
    split_word_timing,
)
from diarlite.errors import DataError, NumericError
from diarlite.numeric.gradcheck import grad_check
from diarlite.numeric.tensor import Tensor
from diarlite.pipeline.segments import TimedToken

SEEDS = range(20)


def _heads(rng, layers=2, hidden=6, subspace=4):
    heads = TimeHeads(layers, hidden, subspace, rng)
    for layer in heads.layers:
        for family in ("start_query", "start_key", "end_query", "end_key"):
            getattr(layer, family).data = rng.standard_normal((subspace, hidden))
    return heads


def _queries(rng, layers=2, n=3, hidden=6):
    return [Tensor(rng.standard_normal((n, hidden))) for _ in range(layers)]


def _one_hot_posterior(starts, ends, length):
    start = np.zeros((len(starts), length))
    end = np.zeros((len(ends), length))
    start[np.arange(len(starts)), starts] = 1.0
    end[np.arange(len(ends)), ends] = 1.0
    return TimePosterior(start=start, end=end)


class TestTimeAttention:
    def test_zero_weights_are_uniform(self, rng):
        heads = TimeHeads(2, 6, 4, rng)
        for layer in heads.layers:
            layer.start_key.data[:] = 0.0
            layer.end_key.data[:] = 0.0
        post = time_attention(_queries(rng), Tensor(rng.standard_normal((7, 6))), heads)
        np.testing.assert_allclose(post.start, 1.0 / 7)
        assert post.argmax_frames()[0] == (0, 0)

    def test_fresh_heads_are_uniform(self, rng):
        post = time_attention(
            _queries(rng), Tensor(rng.standard_normal((5, 6))), TimeHeads(2, 6, 4, rng)
        )
        np.testing.assert_allclose(post.end, 0.2)

    def test_constructed_delta(self, rng):
        heads = TimeHeads(1, 4, 4, rng)
        heads.layers[0].start_query.data = 10.0 * np.eye(4)
        heads.layers[0].start_key.data = np.eye(4)
        h_asr = np.zeros((6, 4))
        h_asr[3] = [1.0, 0.0, 0.0, 0.0]
        query = Tensor([[1.0, 0.0, 0.0, 0.0]])
        post = time_attention([query], Tensor(h_asr), heads)
        assert int(np.argmax(post.start[0])) == 3

    def test_rows_are_distributions(self, rng):
        h_asr = Tensor(rng.standard_normal((9, 6)))
        post = time_attention(_queries(rng), h_asr, _heads(rng))
        for probs in (post.start, post.end):
            assert probs.shape == (3, 9)
            np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
            assert (probs >= 0).all()

    def test_layer_count_mismatch(self, rng):
        with pytest.raises(NumericError, match="decoder layers"):
            h_asr = Tensor(rng.standard_normal((5, 6)))
            time_logits(_queries(rng, layers=1), h_asr, _heads(rng))

    def test_layers_accumulate_before_softmax(self, rng):
        heads = _heads(rng, layers=3)
        for i in (0, 2):
            heads.layers[i].start_query.data[:] = 0.0
        queries = _queries(rng, layers=3)
        h_asr = rng.standard_normal((8, 6))
        layer = heads.layers[1]
        q = queries[1].data @ layer.start_query.data.T
        k = h_asr @ layer.start_key.data.T
        logits = q @ k.T / math.sqrt(4)
        expected = np.exp(logits - logits.max(axis=1, keepdims=True))
        expected /= expected.sum(axis=1, keepdims=True)
        post = time_attention(queries, Tensor(h_asr), heads)
        np.testing.assert_allclose(post.start, expected, atol=1e-10)

    def test_query_scale_scales_logits(self, rng):
        heads = _heads(rng)
        queries = _queries(rng)
        h_asr = Tensor(rng.standard_normal((5, 6)))
        base = time_logits(queries, h_asr, heads).start.data
        for layer in heads.layers:
            layer.start_query.data = 2.5 * layer.start_query.data
        scaled = time_logits(queries, h_asr, heads).start.data
        np.testing.assert_allclose(scaled, 2.5 * base, atol=1e-10)


class TestTimeLoss:
    def test_confident_correct(self):
        start = np.full((1, 4), -60.0)
        end = np.full((1, 4), -60.0)
        start[0, 1] = 60.0
        end[0, 2] = 60.0
        loss = time_ce_loss(TimeLogits(Tensor(start), Tensor(end)), [(1, 2)])
        assert loss.item() == pytest.approx(0.0, abs=1e-12)

    def test_uniform_closed_form(self):
        zeros = Tensor(np.zeros((1, 25)))
        loss = time_ce_loss(TimeLogits(zeros, zeros), [(3, 7)])
        assert loss.item() == pytest.approx(2 * math.log(25))

    def test_specials_contribute_nothing(self, rng):
        logits = TimeLogits(
            Tensor(rng.standard_normal((3, 5))), Tensor(rng.standard_normal((3, 5)))
        )
        with_specials = time_ce_loss(logits, [(0, 1), None, None])
        first = TimeLogits(Tensor(logits.start.data[:1]), Tensor(logits.end.data[:1]))
        alone = time_ce_loss(first, [(0, 1)])
        assert with_specials.item() == pytest.approx(alone.item())

    def test_only_eos(self):
        zeros = Tensor(np.zeros((1, 6)))
        assert time_ce_loss(TimeLogits(zeros, zeros), [None]).item() == 0.0

    def test_out_of_range_frame(self):
        zeros = Tensor(np.zeros((1, 6)))
        with pytest.raises(DataError):
            time_ce_loss(TimeLogits(zeros, zeros), [(2, 6)])

    @pytest.mark.parametrize("seed", SEEDS)
    def test_grad_check(self, seed):
        rng = np.random.default_rng(seed)
        heads = _heads(rng)
        queries = _queries(rng)
        h_asr = Tensor(rng.standard_normal((7, 6)))
        timings = [(1, 3), None, (4, 6)]
        watched = [
            p
            for layer in heads.layers
            for p in (
                layer.start_query,
                layer.start_key,
                layer.end_query,
                layer.end_key,
            )
        ]

        def loss(*_):
            return time_ce_loss(time_logits(queries, h_asr, heads), timings)

        assert grad_check(loss, watched) < 1e-4


class TestTokenTimes:
    def test_index_to_seconds(self):
        (start, end), = infer_token_times(_one_hot_posterior([5], [12], 20), 0.01, 4)
        assert start == pytest.approx(0.20)
        assert end == pytest.approx(0.48)

    def test_frame_zero(self):
        assert infer_token_times(_one_hot_posterior([0], [0], 3)) == [(0.0, 0.0)]

    def test_reversed_span_kept(self):
        (start, end), = infer_token_times(_one_hot_posterior([6], [2], 8), 0.01, 4)
        assert end < start

    def test_ties_take_lowest_frame(self):
        post = TimePosterior(
            start=np.full((1, 4), 0.25), end=np.array([[0.1, 0.4, 0.4, 0.1]])
        )
        assert post.argmax_frames() == [(0, 1)]


class TestReferenceFrames:
    def test_floor_start(self):
        assert map_reference_frames([(0.20, 0.20)], 0.01, 4, 25)[0][0] == 5

    def test_zero(self):
        assert map_reference_frames([(0.0, 0.01)], 0.01, 4, 25) == [(0, 0)]

    def test_end_uses_ceil_minus_one(self):
        assert map_reference_frames([(0.04, 0.12)], 0.01, 4, 25) == [(1, 2)]
        assert map_reference_frames([(0.04, 0.13)], 0.01, 4, 25) == [(1, 3)]

    def test_end_never_precedes_start(self):
        assert map_reference_frames([(0.08, 0.08)], 0.01, 4, 25) == [(2, 2)]

    def test_audio_end_clamps(self):
        assert map_reference_frames([(0.9, 1.0)], 0.01, 4, 25) == [(22, 24)]
        assert map_reference_frames([(1.2, 1.5)], 0.01, 4, 25) == [(24, 24)]

    def test_negative_time(self):
        with pytest.raises(DataError, match="Negative"):
            map_reference_frames([(-0.1, 0.2)], 0.01, 4, 25)

    def test_empty_axis(self):
        with pytest.raises(DataError):
            map_reference_frames([(0.0, 0.1)], 0.01, 4, 0)


class TestWordSplit:
    def test_equal_shares(self):
        spans = split_word_timing(1.0, 1.6, 3)
        np.testing.assert_allclose(spans, [(1.0, 1.2), (1.2, 1.4), (1.4, 1.6)])

    def test_single_subword(self):
        assert split_word_timing(0.5, 0.9, 1) == [(0.5, 0.9)]

    def test_invalid(self):
        with pytest.raises(DataError):
            split_word_timing(0.0, 1.0, 0)
        with pytest.raises(DataError):
            split_word_timing(1.0, 0.5, 2)

    def test_clamp_times(self):
        clamped = clamp_times([(-0.5, 0.3), (None, 9.0)], 0.0, 2.0)
        assert clamped == [(0.0, 0.3), (None, 2.0)]


class TestCtm:
    def test_emit_is_sorted(self):
        tokens = [
            TimedToken(token="▁dog", speaker="B", start=0.5, end=0.75),
            TimedToken(token="▁cat", speaker="A", start=0.1, end=0.3),
        ]
        lines = emit_ctm("rec1", tokens).splitlines()
        assert lines[0].split()[:2] == ["rec1", "A"]
        assert lines[1].split()[-1] == "▁dog"

    def test_parse(self):
        entries = parse_ctm(";; header\nrec1 A 0.100 0.200 ▁cat\n\n")
        assert len(entries) == 1
        assert entries[0].speaker == "A"
        assert entries[0].duration == pytest.approx(0.2)

    def test_emit_then_parse(self):
        tokens = [TimedToken(token="s", speaker="A", start=0.25, end=0.5)]
        (entry,) = parse_ctm(emit_ctm("rec1", tokens))
        assert entry.start == pytest.approx(0.25)
        assert entry.duration == pytest.approx(0.25)

    def test_wrong_field_count(self):
        with pytest.raises(DataError, match="5 fields"):
            parse_ctm("rec1 A 0.1 ▁cat\n")

    def test_bad_number(self):
        with pytest.raises(DataError, match="bad time"):
            parse_ctm("rec1 A x 0.2 ▁cat\n")
