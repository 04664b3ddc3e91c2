"""``diarlite synth``: write the synthetic training and evaluation sets."""

import argparse
import logging
from typing import List

from diarlite.app.commands.base import Command
from diarlite.synth.dataset import (
    EVAL_SPLIT,
    OVERLAP_CONDITIONS,
    TRAIN_SPLIT,
    DatasetBuilder,
    build_eval_set,
    build_training_set,
    write_dataset,
)

logger = logging.getLogger(__name__)


class SynthCommand(Command):
    name = "synth"
    help = "Generate synthetic overlapping-speech mixtures"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--num-samples", type=int, help="Training mixtures")
        parser.add_argument("--num-eval", type=int, help="Held-out mixtures")
        parser.add_argument(
            "--condition",
            choices=OVERLAP_CONDITIONS,
            help="Build the held-out set as sessions under this overlap condition",
        )

    @classmethod
    def overrides(cls, args: argparse.Namespace) -> List[str]:
        out = []
        if args.num_samples is not None:
            out.append(f"synth.num_samples={args.num_samples}")
        if args.num_eval is not None:
            out.append(f"synth.num_eval_samples={args.num_eval}")
        if args.condition is not None:
            out.append(f'synth.overlap_condition="{args.condition}"')
        return out

    def run(self) -> int:
        synth = self.config.synth
        jobs = self.config.pipeline.jobs
        builder = DatasetBuilder(synth, self.config.model)
        train = build_training_set(
            synth.num_samples, synth, self.config.model, jobs=jobs, builder=builder
        )
        write_dataset(
            train, self.data_dir, TRAIN_SPLIT, builder.vocab, builder.inventory
        )
        held_out = build_eval_set(
            synth.num_eval_samples,
            synth,
            self.config.model,
            condition=synth.overlap_condition,
            jobs=jobs,
            builder=builder,
        )
        manifest = write_dataset(
            held_out, self.data_dir, EVAL_SPLIT, builder.vocab, builder.inventory
        )
        print(
            f"Wrote {len(train)} training and {len(held_out)} held-out mixtures "
            f"to {manifest.parent}"
        )
        return 0
