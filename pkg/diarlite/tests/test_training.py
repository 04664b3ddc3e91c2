"""Tests for two-stage training and held-out evaluation services."""

import numpy as np
import pytest

from diarlite.data.db import DatabaseManager
from diarlite.data.repo import LossRepository, RunRepository, ScoreRepository
from diarlite.errors import DataError
from diarlite.model.sa_asr import SAASRModel, load_model
from diarlite.scoring.report import ScoreTable
from diarlite.services.evaluation import (
    ledger_summary,
    record_scores,
    score_entries,
    score_recording,
    teacher_forced_metrics,
)
from diarlite.services.training import (
    LOSS_COLUMNS,
    Trainer,
    examples_from_samples,
    stage_checkpoint_path,
    train_model,
)
from diarlite.synth.dataset import EVAL_SPLIT, load_dataset, write_dataset
from diarlite.utils.config import ScoringConfig
from diarlite.utils.rttm import write_rttm
from diarlite.utils.transcripts import group_tokens, write_transcript


@pytest.fixture
def examples(builder):
    return examples_from_samples([builder.training_sample(i) for i in range(2)])


def _snapshot(model):
    return {name: p.data.copy() for name, p in model.named_parameters()}


class TestTrainer:
    def test_records_per_step(self, tiny_model, tiny_train_config, examples):
        result = Trainer(tiny_model, tiny_train_config, examples).train()
        assert list(result.losses.columns) == LOSS_COLUMNS
        assert list(result.losses["stage"]) == [1, 1, 2, 2]
        assert list(result.losses["step"]) == [1, 2, 1, 2]
        assert (result.losses.loc[result.losses["stage"] == 1, "time_ce"] == 0.0).all()
        assert (result.losses.loc[result.losses["stage"] == 2, "time_ce"] > 0.0).all()
        assert result.final_loss == pytest.approx(result.losses["total"].iloc[-1])

    def test_stage_one_leaves_time_heads(self, tiny_model, tiny_train_config, examples):
        names = set(tiny_model.time_head_names())
        before = _snapshot(tiny_model)
        config = tiny_train_config.model_copy(update={"stage2_steps": 0})
        Trainer(tiny_model, config, examples).train()
        after = _snapshot(tiny_model)
        for name in names:
            np.testing.assert_array_equal(before[name], after[name])
        others = set(before) - names
        assert any(not np.array_equal(before[n], after[n]) for n in others)

    def test_freeze_keeps_other_parameters(
        self, tiny_model, tiny_train_config, examples
    ):
        names = set(tiny_model.time_head_names())
        before = _snapshot(tiny_model)
        config = tiny_train_config.model_copy(
            update={"stage1_steps": 0, "freeze_non_time_heads": True}
        )
        Trainer(tiny_model, config, examples).train()
        after = _snapshot(tiny_model)
        for name in set(before) - names:
            np.testing.assert_array_equal(before[name], after[name])
        assert any(not np.array_equal(before[n], after[n]) for n in names)

    def test_same_seed_same_loss(
        self, tiny_model_config, vocab, tiny_train_config, examples
    ):
        losses = [
            Trainer(SAASRModel(tiny_model_config, vocab), tiny_train_config, examples)
            .train()
            .final_loss
            for _ in range(2)
        ]
        assert losses[0] == losses[1]

    def test_checkpoints_at_stage_boundaries(
        self, tiny_model, tiny_train_config, examples, tmp_path
    ):
        checkpoint = tmp_path / "model.npz"
        result = Trainer(tiny_model, tiny_train_config, examples).train(checkpoint)
        assert result.checkpoints == [tmp_path / "model.stage1.npz", checkpoint]
        loaded = load_model(checkpoint)
        loaded_params = dict(loaded.named_parameters())
        for name, param in tiny_model.named_parameters():
            np.testing.assert_array_equal(loaded_params[name].data, param.data)

    def test_no_stage_two_still_decodes(
        self, tiny_model, tiny_train_config, examples, sample, tmp_path
    ):
        config = tiny_train_config.model_copy(update={"stage2_steps": 0})
        result = Trainer(tiny_model, config, examples).train(tmp_path / "m.npz")
        assert result.checkpoints == [tmp_path / "m.npz"]
        hypothesis = load_model(tmp_path / "m.npz").greedy_decode(
            sample.features, sample.profile_set, max_len=4
        )
        assert 1 <= len(hypothesis.tokens) <= 4

    def test_no_steps(self, tiny_model, tiny_train_config, examples):
        config = tiny_train_config.model_copy(
            update={"stage1_steps": 0, "stage2_steps": 0}
        )
        result = Trainer(tiny_model, config, examples).train()
        assert result.losses.empty
        assert result.final_loss is None

    def test_batches_fill_frame_budget(self, tiny_model, tiny_train_config, examples):
        config = tiny_train_config.model_copy(update={"batch_frames": 10**6})
        trainer = Trainer(tiny_model, config, examples)
        assert len(trainer._next_batch()) == len(examples)

    def test_no_examples(self, tiny_model, tiny_train_config):
        with pytest.raises(DataError):
            Trainer(tiny_model, tiny_train_config, [])

    def test_stage_checkpoint_path(self):
        path = stage_checkpoint_path("out/model.npz", 1)
        assert path.as_posix() == "out/model.stage1.npz"


class TestTrainingLedger:
    def test_run_and_losses_recorded(
        self, tiny_model, tiny_train_config, examples, tmp_path
    ):
        ledger = DatabaseManager("sqlite:///:memory:")
        result = train_model(
            tiny_model,
            tiny_train_config,
            examples,
            checkpoint=tmp_path / "model.npz",
            ledger=ledger,
            run_config={"note": "unit"},
        )
        with ledger.session() as session:
            run = RunRepository(session).get_by_id(result.run_id)
            assert run.stage1_steps == 2
            assert run.final_loss == pytest.approx(result.final_loss)
            assert run.checkpoint_path.endswith("model.npz")
            losses = LossRepository(session).get_by_run(result.run_id)
            steps = [(r.stage, r.step) for r in losses]
            assert steps == [(1, 1), (1, 2), (2, 1), (2, 2)]

    def test_broken_ledger_does_not_abort(
        self, tiny_model, tiny_train_config, examples
    ):
        ledger = DatabaseManager("sqlite:///:memory:")
        ledger.get_engine = _raise_operational
        result = Trainer(tiny_model, tiny_train_config, examples, ledger=ledger).train()
        assert result.run_id is None
        assert len(result.losses) == 4


def _raise_operational():
    from sqlalchemy.exc import OperationalError

    raise OperationalError("connect", {}, Exception("unavailable"))


class TestEvaluation:
    def test_teacher_forced_metrics(self, tiny_model, examples):
        metrics = teacher_forced_metrics(tiny_model, examples)
        assert metrics.tokens == sum(len(e.reference) for e in examples)
        for value in (
            metrics.token_accuracy,
            metrics.speaker_accuracy,
            metrics.timing_accuracy,
        ):
            assert 0.0 <= value <= 1.0

    def test_score_recording_with_words(self, sample):
        ref = sample.reference_segments()
        words = {"A": ["a", "b"]}
        report = score_recording(
            "r", ref, ref, ScoringConfig(), words, words, condition="0S"
        )
        assert report.der.der == 0.0
        assert report.cpwer.cpwer == 0.0
        assert report.condition == "0S"

    def test_score_entries_against_reference_files(self, builder, vocab, tmp_path):
        samples = [builder.eval_sample(i, condition="0S") for i in range(2)]
        write_dataset(samples, tmp_path / "data", EVAL_SPLIT, vocab, builder.inventory)
        entries = load_dataset(tmp_path / "data", EVAL_SPLIT)
        hyp_dir = tmp_path / "hyp"
        for sample in samples:
            stem = hyp_dir / sample.recording_id
            write_rttm(
                stem.with_suffix(".rttm"),
                sample.reference_segments(),
                sample.recording_id,
            )
            per_speaker = sample.reference_tokens(vocab).values()
            tokens = [t for toks in per_speaker for t in toks]
            write_transcript(stem.with_suffix(".json"), group_tokens(tokens))
        table = score_entries(entries, hyp_dir, ScoringConfig(), counting="oracle")
        overall = table.overall()
        assert overall["der"] == pytest.approx(0.0)
        assert overall["cpwer"] == pytest.approx(0.0)
        assert {r.condition for r in table.reports} == {"0S"}

    def test_missing_hypothesis(self, builder, vocab, tmp_path):
        write_dataset(
            [builder.eval_sample(0)], tmp_path, EVAL_SPLIT, vocab, builder.inventory
        )
        entries = load_dataset(tmp_path, EVAL_SPLIT)
        with pytest.raises(DataError, match="No hypothesis RTTM"):
            score_entries(entries, tmp_path / "none", ScoringConfig())

    def test_record_scores(self, sample):
        ref = sample.reference_segments()
        report = score_recording("r1", ref, [], ScoringConfig(), counting="oracle")
        ledger = DatabaseManager("sqlite:///:memory:")
        assert record_scores(ledger, ScoreTable([report]), "baseline") == 1
        with ledger.session() as session:
            repo = ScoreRepository(session)
            (row,) = repo.get_by_system("baseline", counting="oracle")
            assert row.miss == pytest.approx(100.0)
            assert row.cpwer is None

    def test_ledger_summary_after_recording(self, sample):
        ref = sample.reference_segments()
        reports = [
            score_recording("r1", ref, ref, ScoringConfig(), counting="oracle"),
            score_recording("r2", ref, [], ScoringConfig(), counting="oracle"),
        ]
        ledger = DatabaseManager("sqlite:///:memory:")
        assert record_scores(ledger, ScoreTable(reports), "baseline") == 2
        (summary,) = ledger_summary(ledger)
        assert summary["system"] == "baseline"
        assert summary["counting"] == "oracle"
        assert summary["recordings"] == 2
        assert summary["der"] == pytest.approx(50.0)
