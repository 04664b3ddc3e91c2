"""``diarlite diarize``: RTTM, transcript JSON and CTM per recording."""

import argparse
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from diarlite.alignment.ctm import emit_ctm
from diarlite.app.commands.base import Command
from diarlite.errors import ConfigError
from diarlite.model.sa_asr import SAASRModel, load_model
from diarlite.model.types import AcousticFeatures
from diarlite.pipeline.diarize import DiarizationResult, diarize_recording
from diarlite.synth.dataset import EVAL_SPLIT, load_dataset, load_dataset_assets
from diarlite.synth.features_io import read_features
from diarlite.utils.fileio import atomic_write_text, write_json
from diarlite.utils.rttm import write_rttm
from diarlite.utils.transcripts import write_transcript
from diarlite.utils.validators import validate_recording_id

logger = logging.getLogger(__name__)

RUN_INFO_FILE = "diarize.json"
FROM_REFERENCE = 0


class DiarizeCommand(Command):
    name = "diarize"
    help = "Diarize and transcribe recordings with a trained model"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument(
            "recordings",
            nargs="*",
            type=Path,
            help="Feature files (.f32); defaults to the held-out split",
        )
        parser.add_argument("--checkpoint", type=Path, help="Model checkpoint")
        parser.add_argument(
            "--split",
            default=EVAL_SPLIT,
            help="Dataset split used when no files are given",
        )
        parser.add_argument(
            "--oracle-speakers",
            type=int,
            nargs="?",
            const=FROM_REFERENCE,
            metavar="K",
            help=(
                "Use K speakers, or each recording's reference count "
                "when K is omitted"
            ),
        )

    @classmethod
    def overrides(cls, args: argparse.Namespace) -> List[str]:
        out = []
        if args.checkpoint is not None:
            out.append(f"paths.checkpoint={args.checkpoint}")
        if args.oracle_speakers is not None and args.oracle_speakers != FROM_REFERENCE:
            out.append(f"pipeline.speaker_count={args.oracle_speakers}")
        return out

    def _inputs(self) -> List[Tuple[str, AcousticFeatures, Optional[int]]]:
        period = self.config.model.frame_period
        if self.args.recordings:
            if self.args.oracle_speakers == FROM_REFERENCE:
                raise ConfigError(
                    "--oracle-speakers needs K when diarizing loose files"
                )
            inputs = []
            for path in self.args.recordings:
                is_valid, error = validate_recording_id(path.stem)
                if not is_valid:
                    raise ConfigError(f"Bad recording file name {path}: {error}")
                inputs.append((path.stem, read_features(path, period), None))
            return inputs
        return [
            (
                e.recording_id,
                e.load_features(),
                len({u.speaker_id for u in e.utterances}),
            )
            for e in load_dataset(self.data_dir, self.args.split)
        ]

    def _write(self, result: DiarizationResult) -> None:
        stem = self.output_dir / result.recording_id
        write_rttm(stem.with_suffix(".rttm"), result.segments, result.recording_id)
        write_transcript(stem.with_suffix(".json"), result.transcript)
        atomic_write_text(
            stem.with_suffix(".ctm"), emit_ctm(result.recording_id, result.tokens)
        )

    def run(self) -> int:
        _, inventory = load_dataset_assets(self.data_dir)
        model: SAASRModel = load_model(
            self.config.paths.resolved_checkpoint(), self.config.model
        )
        from_reference = self.args.oracle_speakers == FROM_REFERENCE
        counting = (
            "estimated" if self.config.pipeline.oracle_speakers is None else "oracle"
        )
        if from_reference:
            counting = "oracle"

        inputs = self._inputs()
        for recording_id, features, ref_speakers in inputs:
            pipeline = self.config.pipeline
            if from_reference:
                pipeline = pipeline.model_copy(update={"speaker_count": ref_speakers})
            result = diarize_recording(
                features,
                model,
                pipeline,
                np.asarray(inventory.projection),
                recording_id=recording_id,
            )
            self._write(result)
            logger.info(
                "%s: %d speakers, %d segments, %d tokens",
                recording_id,
                result.num_speakers,
                len(result.segments),
                len(result.tokens),
            )
        write_json(
            self.output_dir / RUN_INFO_FILE,
            {"counting": counting, "recordings": [r for r, _, _ in inputs]},
        )
        print(f"Diarized {len(inputs)} recordings into {self.output_dir}")
        return 0
