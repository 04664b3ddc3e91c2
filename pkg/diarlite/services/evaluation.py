"""Held-out measurement: teacher-forced accuracies and pipeline scoring."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from sqlalchemy.exc import SQLAlchemyError
from tqdm import tqdm

from diarlite.data.db import DatabaseManager
from diarlite.data.models import ScoreRecord
from diarlite.data.repo import ScoreRepository
from diarlite.errors import DataError
from diarlite.model.sa_asr import SAASRModel
from diarlite.pipeline.diarize import DiarizationResult, diarize_recording
from diarlite.pipeline.segments import DiarSegment
from diarlite.scoring.der import der
from diarlite.scoring.report import ScoreReport, ScoreTable
from diarlite.scoring.wer import cpwer
from diarlite.services.training import TrainingExample
from diarlite.synth.dataset import DatasetEntry
from diarlite.utils.config import PipelineConfig, ScoringConfig
from diarlite.utils.rttm import read_rttm
from diarlite.utils.transcripts import read_transcript, transcript_words

logger = logging.getLogger(__name__)


@dataclass
class TeacherForcedMetrics:
    """Fractions in [0, 1] with the counts behind them."""

    tokens: int
    correct_tokens: int
    timed_tokens: int
    correct_speakers: int
    correct_times: int

    @property
    def token_accuracy(self) -> float:
        return self.correct_tokens / max(1, self.tokens)

    @property
    def speaker_accuracy(self) -> float:
        return self.correct_speakers / max(1, self.timed_tokens)

    @property
    def timing_accuracy(self) -> float:
        return self.correct_times / max(1, self.timed_tokens)


def teacher_forced_metrics(
    model: SAASRModel, examples: Sequence[TrainingExample], tolerance: int = 3
) -> TeacherForcedMetrics:
    """Next-token accuracy, speaker attribution and time accuracy.

    Speaker and time accuracy count non-special tokens only. A token's time
    is correct when both its argmax start and end frames are within
    ``tolerance`` encoder frames of the reference.
    """
    counts = TeacherForcedMetrics(0, 0, 0, 0, 0)
    for example in examples:
        ref = example.reference
        post = model.token_posteriors(example.features, example.profiles, ref)
        predicted = post["tokens"].argmax(axis=1)
        speakers = post["speakers"].argmax(axis=1)
        starts = post["start"].argmax(axis=1)
        ends = post["end"].argmax(axis=1)
        counts.tokens += len(ref)
        counts.correct_tokens += int((predicted == np.asarray(ref.tokens)).sum())
        for i, span in enumerate(ref.timings):
            if span is None:
                continue
            counts.timed_tokens += 1
            counts.correct_speakers += int(speakers[i] == ref.speakers[i])
            start_ok = abs(int(starts[i]) - span[0]) <= tolerance
            end_ok = abs(int(ends[i]) - span[1]) <= tolerance
            counts.correct_times += int(start_ok and end_ok)
    return counts


def diarize_entries(
    entries: Sequence[DatasetEntry],
    model: SAASRModel,
    config: PipelineConfig,
    projection: np.ndarray,
    jobs: Optional[int] = None,
) -> List[DiarizationResult]:
    """Run the pipeline on every dataset recording, in manifest order."""
    results = []
    for entry in tqdm(entries, desc="diarize", disable=None):
        results.append(
            diarize_recording(
                entry.load_features(),
                model,
                config,
                projection,
                recording_id=entry.recording_id,
                jobs=jobs,
            )
        )
    return results


def score_recording(
    recording_id: str,
    ref_segments: Sequence[DiarSegment],
    hyp_segments: Sequence[DiarSegment],
    scoring: ScoringConfig,
    ref_words: Optional[Dict[str, List[str]]] = None,
    hyp_words: Optional[Dict[str, List[str]]] = None,
    condition: Optional[str] = None,
    counting: str = "estimated",
) -> ScoreReport:
    """DER of one recording, plus cpWER when both word sides are given."""
    result = der(ref_segments, hyp_segments, scoring.collar_sec, scoring.grid_sec)
    words = None
    if ref_words is not None and hyp_words is not None:
        words = cpwer(ref_words, hyp_words, scoring.brute_force_max_speakers)
    return ScoreReport(recording_id, result, words, condition, counting)


def score_entries(
    entries: Sequence[DatasetEntry],
    hyp_dir: Union[str, Path],
    scoring: ScoringConfig,
    counting: str = "estimated",
) -> ScoreTable:
    """Score ``<hyp_dir>/<recording>.rttm`` (and ``.json`` when present).

    Raises:
        DataError: If a recording has no hypothesis RTTM.
    """
    hyp_root = Path(hyp_dir)
    reports = []
    for entry in entries:
        hyp_rttm = hyp_root / f"{entry.recording_id}.rttm"
        if not hyp_rttm.exists():
            raise DataError(
                f"No hypothesis RTTM for {entry.recording_id} in {hyp_root}"
            )
        hyp_json = hyp_root / f"{entry.recording_id}.json"
        ref_words = hyp_words = None
        if hyp_json.exists() and entry.transcript_path.exists():
            ref_words = transcript_words(read_transcript(entry.transcript_path))
            hyp_words = transcript_words(read_transcript(hyp_json))
        reports.append(
            score_recording(
                entry.recording_id,
                read_rttm(entry.rttm_path, entry.recording_id),
                read_rttm(hyp_rttm, entry.recording_id),
                scoring,
                ref_words,
                hyp_words,
                condition=entry.condition,
                counting=counting,
            )
        )
    return ScoreTable(reports)


def record_scores(ledger: DatabaseManager, table: ScoreTable, system: str) -> int:
    """Store one ledger row per recording in a single commit.

    Failures are logged, not raised, and leave no rows behind.

    Returns:
        Rows written.
    """
    rows = []
    for report in table.reports:
        row = report.to_row()
        rows.append(
            ScoreRecord(
                recording_id=report.recording_id,
                system=system,
                counting=report.counting,
                condition=report.condition,
                ser=row["ser"],
                miss=row["miss"],
                fa=row["fa"],
                der=row["der"],
                cpwer=row["cpwer"],
                ref_speech_sec=row["ref_speech_sec"],
            )
        )
    try:
        ledger.init_database()
        with ledger.session() as session:
            return ScoreRepository(session).add_many(rows)
    except SQLAlchemyError as e:
        logger.warning("Failed to record scores for %s: %s", system, e)
        return 0


def ledger_summary(ledger: DatabaseManager) -> List[Dict[str, object]]:
    """Speech-weighted DER of every system recorded so far; empty on ledger errors."""
    try:
        with ledger.session() as session:
            return ScoreRepository(session).summary()
    except SQLAlchemyError as e:
        logger.warning("Failed to read the score ledger: %s", e)
        return []
