"""Tests for DER, speaker mapping, WER, cpWER and score tables."""

from itertools import permutations

import numpy as np
import pandas as pd
import pytest

from diarlite.errors import DataError
from diarlite.pipeline.segments import DiarSegment
from diarlite.scoring.assignment import (
    brute_force_mapping,
    map_speakers_optimal,
    matched_total,
)
from diarlite.scoring.der import DerResult, der, prepare, score_frames
from diarlite.scoring.report import OVERALL, ScoreReport, ScoreTable
from diarlite.scoring.wer import EditCounts, cpwer, wer


def _seg(speaker, start, end):
    return DiarSegment(speaker, start, end)


@pytest.fixture
def two_speaker_ref():
    return [_seg("A", 0.0, 5.0), _seg("B", 5.0, 10.0)]


class TestDer:
    def test_perfect_under_any_labels(self, two_speaker_ref):
        result = der(two_speaker_ref, [_seg("y", 0.0, 5.0), _seg("x", 5.0, 10.0)])
        assert result.der == 0.0
        assert result.mapping == {"A": "y", "B": "x"}
        assert result.total_ref_speech_sec == pytest.approx(10.0)

    def test_empty_hypothesis_is_all_miss(self, two_speaker_ref):
        result = der(two_speaker_ref, [])
        assert result.miss == pytest.approx(100.0)
        assert result.fa == 0.0
        assert result.ser == 0.0
        assert result.der == pytest.approx(100.0)

    def test_wrong_speaker_stretch(self, two_speaker_ref):
        result = der(two_speaker_ref, [_seg("X", 0.0, 6.0), _seg("Y", 6.0, 10.0)])
        assert result.ser_frames == 100
        assert result.ser == pytest.approx(10.0)
        assert result.miss == 0.0
        assert result.fa == 0.0

    def test_false_alarm_speaker(self):
        result = der([_seg("A", 0.0, 1.0)], [_seg("X", 0.0, 1.0), _seg("Y", 1.0, 2.0)])
        assert result.fa == pytest.approx(100.0)
        assert result.mapping == {"A": "X"}

    def test_overlap_counts_each_speaker(self):
        ref = [_seg("A", 0.0, 2.0), _seg("B", 1.0, 3.0)]
        result = der(ref, [_seg("X", 0.0, 3.0)])
        assert result.total_frames == 400
        assert result.miss_frames == 100
        assert result.ser_frames == 100
        assert result.der == pytest.approx(50.0)

    def test_collar_removes_boundaries(self):
        ref = [_seg("A", 0.0, 2.0)]
        hyp = [_seg("X", 0.1, 2.0)]
        assert der(ref, hyp).miss == pytest.approx(5.0)
        assert der(ref, hyp, collar_sec=0.25).der == 0.0

    def test_decomposition_identity(self, two_speaker_ref):
        hyp = [_seg("X", 0.5, 7.0), _seg("Y", 6.0, 11.0), _seg("Z", 2.0, 3.0)]
        result = der(two_speaker_ref, hyp)
        parts = result.ser_frames + result.miss_frames + result.fa_frames
        assert result.error_frames == parts
        assert result.der == pytest.approx(result.ser + result.miss + result.fa)

    def test_invariant_to_order_and_labels(self, two_speaker_ref):
        hyp = [_seg("X", 0.5, 7.0), _seg("Y", 6.0, 11.0)]
        renamed = [_seg("q", 6.0, 11.0), _seg("p", 0.5, 7.0)]
        first, second = der(two_speaker_ref, hyp), der(two_speaker_ref[::-1], renamed)
        assert (first.ser_frames, first.miss_frames, first.fa_frames) == (
            second.ser_frames,
            second.miss_frames,
            second.fa_frames,
        )

    def test_bad_collar(self, two_speaker_ref):
        with pytest.raises(DataError):
            der(two_speaker_ref, [], collar_sec=-0.1)

    def test_empty_reference(self):
        result = der([], [_seg("X", 0.0, 1.0)])
        assert result.total_frames == 0
        assert result.fa_frames == 100


class TestAssignment:
    def test_diagonal_is_identity(self):
        overlap = np.diag([5.0, 4.0, 3.0]) + 0.5
        assert map_speakers_optimal(overlap) == {0: 0, 1: 1, 2: 2}

    def test_permuted_diagonal(self):
        perm = [2, 0, 1]
        overlap = np.zeros((3, 3))
        overlap[np.arange(3), perm] = 10.0
        assert map_speakers_optimal(overlap) == {0: 2, 1: 0, 2: 1}

    def test_more_hypothesis_speakers(self):
        mapping = map_speakers_optimal(np.array([[1.0, 9.0, 2.0], [3.0, 4.0, 0.0]]))
        assert mapping == {0: 1, 1: 0}

    def test_empty(self):
        assert map_speakers_optimal(np.zeros((0, 2))) == {}

    def test_negative_entries(self):
        with pytest.raises(DataError):
            map_speakers_optimal(np.array([[1.0, -1.0]]))

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        shape = tuple(rng.integers(1, 5, size=2))
        overlap = rng.integers(0, 50, size=shape).astype(float)
        fast = matched_total(overlap, map_speakers_optimal(overlap))
        assert fast == matched_total(overlap, brute_force_mapping(overlap))


class TestWer:
    def test_identical(self):
        assert wer(["a", "b"], ["a", "b"]).rate == 0.0

    def test_one_substitution_in_ten(self):
        ref = list("abcdefghij")
        counts = wer(ref, ref[:4] + ["z"] + ref[5:])
        assert counts == EditCounts(1, 0, 0, 10)
        assert counts.rate == pytest.approx(10.0)

    def test_empty_hypothesis(self):
        counts = wer(list("abcde"), [])
        assert counts.deletions == 5
        assert counts.rate == pytest.approx(100.0)

    def test_empty_reference(self):
        counts = wer([], ["a", "b"])
        assert counts.insertions == 2
        assert counts.rate == pytest.approx(200.0)

    def test_deletion_and_insertion(self):
        assert wer(["a", "b", "c"], ["a", "c"]).deletions == 1
        assert wer(["a", "b", "c"], ["a", "x", "b", "c"]).insertions == 1

    def test_counts_add(self):
        total = EditCounts(1, 0, 2, 5) + EditCounts(0, 1, 0, 3)
        assert total == EditCounts(1, 1, 2, 8)

    @pytest.mark.parametrize("seed", range(10))
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (
            list(rng.choice(list("xyz"), size=rng.integers(0, 6))) for _ in range(3)
        )
        assert wer(a, c).errors <= wer(a, b).errors + wer(b, c).errors


class TestCpwer:
    def test_permuted_labels(self):
        ref = {"A": ["a", "b"], "B": ["c", "d", "e"]}
        result = cpwer(ref, {"2": ["c", "d", "e"], "1": ["a", "b"]})
        assert result.cpwer == 0.0
        assert result.pairs == {"A": "1", "B": "2"}

    def test_single_speaker_reduces_to_wer(self):
        words = [f"w{i}" for i in range(20)]
        hyp = words[:7] + ["oops"] + words[8:]
        assert cpwer({"A": words}, {"X": hyp}).cpwer == pytest.approx(5.0)

    def test_spurious_speaker_adds_insertions(self):
        ref = {"A": ["a", "b"]}
        result = cpwer(ref, {"X": ["a", "b"], "Z": ["p", "q", "r"]})
        assert result.counts.insertions == 3
        assert result.unmatched_hyp == ["Z"]
        assert result.pairs == {"A": "X"}

    def test_missing_speaker_is_deleted(self):
        result = cpwer({"A": ["a"], "B": ["b", "c"]}, {"X": ["b", "c"]})
        assert result.pairs == {"A": None, "B": "X"}
        assert result.counts.deletions == 1
        assert result.per_speaker["A"].deletions == 1

    def test_identity(self):
        ref = {"A": ["a", "b"], "B": ["c"], "C": []}
        assert cpwer(ref, ref).errors == 0

    def test_assignment_beyond_brute_force(self):
        ref = {"A": ["a", "b"], "B": ["c"], "C": ["d", "e", "f"]}
        hyp = {"x": ["d", "e"], "y": ["a", "b", "b"], "z": ["c", "g"]}
        exhaustive = cpwer(ref, hyp)
        solved = cpwer(ref, hyp, brute_force_max_speakers=1)
        assert solved.errors == exhaustive.errors
        assert solved.pairs == exhaustive.pairs

    def test_word_counts(self):
        result = cpwer({"A": ["a", "b", "c"]}, {"X": ["a"], "Y": ["b"]})
        assert result.ref_words == 3
        assert result.hyp_words == 2


def _reports():
    scored = cpwer({"A": ["a", "b"]}, {"X": ["a", "c"]})
    return [
        ScoreReport("r2", DerResult(10, 0, 0, 100), condition="0S"),
        ScoreReport("r1", DerResult(0, 20, 10, 300), cpwer=scored, condition="0L"),
    ]


class TestScoreTable:
    def test_rows_sorted_with_overall(self):
        frame = ScoreTable(_reports()).frame()
        assert list(frame["recording"]) == ["r1", "r2", OVERALL]
        assert frame.iloc[0]["der"] == pytest.approx(10.0)
        assert pd.isna(frame.iloc[1]["cpwer"])

    def test_overall_pools_frames(self):
        overall = ScoreTable(_reports()).overall()
        assert overall["der"] == pytest.approx(10.0)
        assert overall["ser"] == pytest.approx(2.5)
        assert overall["cpwer"] == pytest.approx(50.0)
        assert overall["ref_speech_sec"] == pytest.approx(4.0)

    def test_by_condition(self):
        grouped = ScoreTable(_reports()).by_condition()
        assert list(grouped["recording"]) == ["0L", "0S"]
        assert "condition" not in grouped.columns
        assert grouped.iloc[1]["ser"] == pytest.approx(10.0)

    def test_text_marks_missing_cpwer(self):
        lines = ScoreTable(_reports()).to_text().splitlines()
        assert lines[0].split()[:5] == ["recording", "ser", "miss", "fa", "der"]
        r2 = next(line for line in lines if line.split()[0] == "r2")
        assert "-" in r2.split()

    def test_json(self):
        payload = ScoreTable(_reports()).to_json()
        first = payload["recordings"][0]
        assert first["recording"] == "r1"
        assert first["frames"] == {"ser": 0, "miss": 20, "fa": 10, "total": 300}
        assert first["cpwer"]["substitutions"] == 1
        assert "cpwer" not in payload["recordings"][1]
        assert payload["overall"]["recording"] == OVERALL

    def test_empty_table(self):
        overall = ScoreTable([]).overall()
        assert overall["der"] == 0.0
        assert overall["cpwer"] is None


def _random_segments(rng, prefix, max_speakers=4, max_segments=10):
    num_speakers = int(rng.integers(1, max_speakers + 1))
    segments = []
    for _ in range(int(rng.integers(1, max_segments + 1))):
        start = int(rng.integers(0, 200))
        length = int(rng.integers(1, 50))
        speaker = f"{prefix}{int(rng.integers(num_speakers))}"
        segments.append(_seg(speaker, start / 100, (start + length) / 100))
    return segments


def _exhaustive_error_frames(ref, hyp):
    ref_speakers, hyp_speakers, ref_active, hyp_active = prepare(ref, hyp)
    n_ref, n_hyp = len(ref_speakers), len(hyp_speakers)
    best = None
    for perm in permutations(range(max(n_ref, n_hyp))):
        mapping = {r: perm[r] for r in range(n_ref) if perm[r] < n_hyp}
        ser, miss, fa, _ = score_frames(ref_active, hyp_active, mapping)
        best = ser + miss + fa if best is None else min(best, ser + miss + fa)
    return best


@pytest.mark.parametrize("seed", range(200))
def test_der_matches_exhaustive_mapping(seed):
    rng = np.random.default_rng(seed)
    ref, hyp = _random_segments(rng, "r"), _random_segments(rng, "h")
    result = der(ref, hyp)
    assert result.error_frames == _exhaustive_error_frames(ref, hyp)
    assert result.der == pytest.approx(result.ser + result.miss + result.fa)


@pytest.mark.parametrize("seed", range(30))
def test_cpwer_assignment_matches_permutation_search(seed):
    rng = np.random.default_rng(seed)

    def side(prefix):
        return {
            f"{prefix}{i}": list(rng.choice(list("abcd"), size=int(rng.integers(0, 6))))
            for i in range(int(rng.integers(1, 5)))
        }

    ref, hyp = side("r"), side("h")
    exhaustive = cpwer(ref, hyp)
    assert cpwer(ref, hyp, brute_force_max_speakers=0).errors == exhaustive.errors
    assert cpwer(ref, dict(reversed(list(hyp.items())))).errors == exhaustive.errors
