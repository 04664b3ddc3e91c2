"""``diarlite train``: two-stage training on the synthetic training split."""

import argparse
import logging
from pathlib import Path
from typing import List

from diarlite.app.commands.base import Command
from diarlite.charts.loss_curve import plot_loss_curve
from diarlite.model.sa_asr import SAASRModel, load_model
from diarlite.services.training import Trainer, examples_from_entries
from diarlite.synth.dataset import TRAIN_SPLIT, load_dataset, load_dataset_assets

logger = logging.getLogger(__name__)


class TrainCommand(Command):
    name = "train"
    help = "Train the model: joint NLL, then NLL plus time cross entropy"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--checkpoint", type=Path, help="Output checkpoint path")
        parser.add_argument(
            "--init-from",
            type=Path,
            help="Start from this checkpoint instead of fresh weights",
        )
        parser.add_argument(
            "--time-heads-only",
            action="store_true",
            help="Freeze everything except the time heads in stage 2",
        )
        parser.add_argument(
            "--plot", action="store_true", help="Write the loss curve image"
        )
        parser.add_argument(
            "--no-ledger", action="store_true", help="Do not record the run"
        )

    @classmethod
    def overrides(cls, args: argparse.Namespace) -> List[str]:
        out = []
        if args.time_heads_only:
            out.append("train.freeze_non_time_heads=true")
        if args.checkpoint is not None:
            out.append(f"paths.checkpoint={args.checkpoint}")
        return out

    def run(self) -> int:
        entries = load_dataset(self.data_dir, TRAIN_SPLIT)
        vocab, _ = load_dataset_assets(self.data_dir)
        if self.args.init_from is not None:
            model = load_model(self.args.init_from, self.config.model)
        else:
            model = SAASRModel(self.config.model, vocab)
        logger.info("Training on %d mixtures from %s", len(entries), self.data_dir)

        checkpoint = self.config.paths.resolved_checkpoint()
        trainer = Trainer(
            model,
            self.config.train,
            examples_from_entries(entries),
            ledger=self.ledger(),
            run_name=checkpoint.stem,
            run_config_json=self.config.model_dump_json(),
        )
        result = trainer.train(checkpoint)

        if self.args.plot and not result.losses.empty:
            image = plot_loss_curve(result.losses, self.output_dir / "loss_curve.png")
            logger.info("Loss curve written to %s", image)
        final = "n/a" if result.final_loss is None else f"{result.final_loss:.4f}"
        print(f"Final loss {final}; checkpoint {checkpoint}")
        return 0
