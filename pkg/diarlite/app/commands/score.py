"""``diarlite score``: DER and cpWER of diarize output against the references."""

import argparse
import logging
from pathlib import Path
from typing import List

from diarlite.app.commands.base import Command
from diarlite.app.commands.diarize import RUN_INFO_FILE
from diarlite.charts.timeline import plot_timeline
from diarlite.services.evaluation import ledger_summary, record_scores, score_entries
from diarlite.synth.dataset import EVAL_SPLIT, load_dataset
from diarlite.utils.fileio import atomic_write_text, read_json, write_json
from diarlite.utils.formatters import format_percent
from diarlite.utils.rttm import read_rttm

logger = logging.getLogger(__name__)

REPORT_JSON = "score.json"
REPORT_TEXT = "score.txt"


class ScoreCommand(Command):
    name = "score"
    help = "Score diarization output against the reference RTTM and transcripts"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument(
            "--split", default=EVAL_SPLIT, help="Dataset split to score"
        )
        parser.add_argument(
            "--hyp-dir",
            type=Path,
            help="Directory of diarize output; the output dir by default",
        )
        parser.add_argument(
            "--system", default="sa-asr", help="System label in the ledger"
        )
        parser.add_argument(
            "--by-condition",
            action="store_true",
            help="Pool rows per overlap condition",
        )
        parser.add_argument(
            "--plot", action="store_true", help="Write timeline images"
        )
        parser.add_argument(
            "--no-ledger", action="store_true", help="Do not record scores"
        )

    @classmethod
    def overrides(cls, args: argparse.Namespace) -> List[str]:
        return []

    def _counting(self, hyp_dir: Path) -> str:
        info = hyp_dir / RUN_INFO_FILE
        if not info.exists():
            return "estimated"
        return str(read_json(info).get("counting", "estimated"))

    def run(self) -> int:
        entries = load_dataset(self.data_dir, self.args.split)
        hyp_dir = self.args.hyp_dir or self.output_dir
        table = score_entries(
            entries, hyp_dir, self.config.scoring, self._counting(hyp_dir)
        )

        write_json(self.output_dir / REPORT_JSON, table.to_json())
        text = table.to_text(group_by_condition=self.args.by_condition)
        atomic_write_text(self.output_dir / REPORT_TEXT, text)
        print(text, end="")

        ledger = self.ledger()
        if ledger is not None:
            record_scores(ledger, table, self.args.system)
            for row in ledger_summary(ledger):
                logger.info(
                    "Ledger: %s (%s) DER %s%% over %d recordings",
                    row["system"],
                    row["counting"],
                    format_percent(row["der"]),
                    row["recordings"],
                )
        if self.args.plot:
            for entry in entries:
                plot_timeline(
                    read_rttm(entry.rttm_path, entry.recording_id),
                    read_rttm(
                        hyp_dir / f"{entry.recording_id}.rttm", entry.recording_id
                    ),
                    self.output_dir / "plots" / f"{entry.recording_id}.png",
                    title=entry.recording_id,
                )
        return 0
