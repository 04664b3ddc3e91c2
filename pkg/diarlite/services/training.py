"""Two-stage training of the speaker-attributed ASR model.

Stage 1 minimizes the joint token/speaker NLL. Stage 2 adds the token time
cross entropy and starts a fresh optimizer, so the warmup restarts.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Set, Union

import numpy as np
import pandas as pd
from sqlalchemy.exc import SQLAlchemyError
from tqdm import tqdm

from diarlite.alignment.objective import combined_loss
from diarlite.data.db import DatabaseManager
from diarlite.data.repo import LossRepository, RunRepository
from diarlite.errors import DataError, NumericError
from diarlite.model.sa_asr import SAASRModel, save_model
from diarlite.model.types import AcousticFeatures, ProfileSet, SerializedReference
from diarlite.numeric.nn import count_parameters
from diarlite.numeric.optim import Adam
from diarlite.numeric.tensor import Graph, backward
from diarlite.synth.dataset import DatasetEntry
from diarlite.synth.mixer import MixtureSample
from diarlite.utils.config import TrainConfig
from diarlite.utils.formatters import format_delta_loss

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ["stage", "step", "nll", "time_ce", "total"]


@dataclass
class TrainingExample:
    features: AcousticFeatures
    profiles: ProfileSet
    reference: SerializedReference

    @property
    def num_frames(self) -> int:
        return self.features.num_frames


def examples_from_entries(entries: Sequence[DatasetEntry]) -> List[TrainingExample]:
    """Load every entry's features into memory."""
    return [
        TrainingExample(e.load_features(), e.profile_set, e.reference) for e in entries
    ]


def examples_from_samples(samples: Sequence[MixtureSample]) -> List[TrainingExample]:
    return [TrainingExample(s.features, s.profile_set, s.reference) for s in samples]


@dataclass
class TrainingResult:
    """Loss history, final loss and the checkpoints written."""

    losses: pd.DataFrame
    final_loss: Optional[float] = None
    checkpoints: List[Path] = field(default_factory=list)
    run_id: Optional[int] = None


def stage_checkpoint_path(path: Union[str, Path], stage: int) -> Path:
    """``model.npz`` -> ``model.stage1.npz``."""
    path = Path(path)
    return path.with_name(f"{path.stem}.stage{stage}{path.suffix}")


class Trainer:
    """Owns a model's parameters for the duration of training."""

    def __init__(
        self,
        model: SAASRModel,
        config: TrainConfig,
        examples: Sequence[TrainingExample],
        ledger: Optional[DatabaseManager] = None,
        run_name: str = "train",
        run_config_json: str = "{}",
    ) -> None:
        """Initialize the trainer.

        Args:
            model: Model to update in place.
            config: Schedule and optimizer settings.
            examples: Training mixtures.
            ledger: Optional experiment ledger for run and loss records.
            run_name: Ledger label of the run.
            run_config_json: Full run configuration stored with the run.

        Raises:
            DataError: If there are no examples.
        """
        if not examples:
            raise DataError("No training examples")
        self.model = model
        self.config = config
        self.examples = list(examples)
        self.ledger = ledger
        self.run_name = run_name
        self.run_config_json = run_config_json
        self.rng = np.random.default_rng(config.seed)
        self.records: List[Dict[str, float]] = []
        self._order: List[int] = []

    def _next_batch(self) -> List[TrainingExample]:
        """Examples up to ``batch_frames`` frames, at least one."""
        batch: List[TrainingExample] = []
        frames = 0
        while not batch or frames < self.config.batch_frames:
            if not self._order:
                self._order = [int(i) for i in self.rng.permutation(len(self.examples))]
            example = self.examples[self._order.pop()]
            batch.append(example)
            frames += example.num_frames
            if len(batch) >= len(self.examples):
                break
        return batch

    def _trainable(self, stage: int) -> Set[str]:
        time_heads = set(self.model.time_head_names())
        names = {name for name, _ in self.model.named_parameters()}
        if stage == 1:
            return names - time_heads
        if self.config.freeze_non_time_heads:
            return time_heads
        return names

    def _sample_loss(
        self, stage: int, example: TrainingExample, params
    ) -> Dict[str, object]:
        with Graph() as graph:
            if stage == 1:
                nll = self.model.joint_nll_loss(
                    example.features, example.profiles, example.reference
                )
                total, time_ce = nll, None
            else:
                parts = combined_loss(
                    self.model, example.features, example.profiles, example.reference
                )
                total, nll, time_ce = parts.total, parts.nll, parts.time_ce
            grads = backward(graph, total, params)
        return {
            "grads": grads,
            "nll": nll.item(),
            "time_ce": 0.0 if time_ce is None else time_ce.item(),
            "total": total.item(),
        }

    def _step(self, stage: int, optimizer: Adam, params) -> Dict[str, float]:
        batch = self._next_batch()
        summed: Dict[str, np.ndarray] = {}
        totals = {"nll": 0.0, "time_ce": 0.0, "total": 0.0}
        for example in batch:
            out = self._sample_loss(stage, example, params)
            for name, grad in out["grads"].items():
                summed[name] = summed[name] + grad if name in summed else grad.copy()
            for key in totals:
                totals[key] += float(out[key])
        scale = 1.0 / len(batch)
        grads = {name: grad * scale for name, grad in summed.items()}
        losses = {key: value * scale for key, value in totals.items()}
        if not np.isfinite(losses["total"]):
            raise NumericError(f"Non-finite loss {losses['total']} in stage {stage}")
        optimizer.step(grads)
        return losses

    def run_stage(self, stage: int, steps: int) -> List[Dict[str, float]]:
        """Run one stage and return its loss records."""
        if steps <= 0:
            logger.info("Stage %d: no steps", stage)
            return []
        trainable = self._trainable(stage)
        lr = self.config.lr if stage == 1 else self.config.stage2_lr
        optimizer = Adam(
            self.model.named_parameters(),
            lr=lr,
            warmup_steps=self.config.warmup_steps,
            trainable=trainable,
        )
        params = [p for name, p in self.model.named_parameters() if name in trainable]
        logger.info(
            "Stage %d: %d steps over %d trainable tensors (%d values), lr %.2e",
            stage,
            steps,
            len(params),
            count_parameters(self.model, sorted(trainable)),
            lr,
        )
        records = []
        bar = tqdm(range(1, steps + 1), desc=f"stage {stage}", disable=None)
        for step in bar:
            losses = self._step(stage, optimizer, params)
            record = {"stage": stage, "step": step, **losses}
            records.append(record)
            bar.set_postfix(loss=f"{losses['total']:.4f}")
            if step % self.config.log_every == 0 or step == steps:
                logger.info(
                    "stage %d step %d nll %.4f time_ce %.4f total %.4f "
                    "(%s since step 1)",
                    stage,
                    step,
                    losses["nll"],
                    losses["time_ce"],
                    losses["total"],
                    format_delta_loss(records[0]["total"], losses["total"]),
                )
        self.records.extend(records)
        return records

    def train(self, checkpoint: Optional[Union[str, Path]] = None) -> TrainingResult:
        """Run both stages.

        Args:
            checkpoint: Final checkpoint path. The stage-1 model is also
                written next to it when stage 2 follows.

        Returns:
            Loss history and checkpoint paths.
        """
        result = TrainingResult(losses=pd.DataFrame(columns=LOSS_COLUMNS))
        result.run_id = self._ledger_start()

        self.run_stage(1, self.config.stage1_steps)
        if checkpoint is not None and self.config.stage2_steps > 0:
            result.checkpoints.append(
                save_model(
                    self.model,
                    stage_checkpoint_path(checkpoint, 1),
                    {"stage": 1, "steps": self.config.stage1_steps},
                )
            )
        self.run_stage(2, self.config.stage2_steps)
        if checkpoint is not None:
            result.checkpoints.append(
                save_model(
                    self.model,
                    checkpoint,
                    {
                        "stage": 2,
                        "steps": [self.config.stage1_steps, self.config.stage2_steps],
                    },
                )
            )

        result.losses = pd.DataFrame(self.records, columns=LOSS_COLUMNS)
        if self.records:
            result.final_loss = float(self.records[-1]["total"])
        self._ledger_finish(result)
        return result

    def _ledger_start(self) -> Optional[int]:
        if self.ledger is None:
            return None
        try:
            self.ledger.init_database()
            with self.ledger.session() as session:
                run = RunRepository(session).create(
                    name=self.run_name,
                    config_json=self.run_config_json,
                    seed=self.config.seed,
                    stage1_steps=self.config.stage1_steps,
                    stage2_steps=self.config.stage2_steps,
                )
                return run.id
        except SQLAlchemyError as e:
            logger.warning("Ledger unavailable, run not recorded: %s", e)
            return None

    def _ledger_finish(self, result: TrainingResult) -> None:
        if self.ledger is None or result.run_id is None:
            return
        checkpoint = str(result.checkpoints[-1]) if result.checkpoints else None
        try:
            with self.ledger.session() as session:
                LossRepository(session).add_many(result.run_id, self.records)
                RunRepository(session).finish(
                    result.run_id, result.final_loss, checkpoint
                )
        except SQLAlchemyError as e:
            logger.warning("Failed to record losses of run %s: %s", result.run_id, e)


def train_model(
    model: SAASRModel,
    config: TrainConfig,
    examples: Sequence[TrainingExample],
    checkpoint: Optional[Union[str, Path]] = None,
    ledger: Optional[DatabaseManager] = None,
    run_config: Optional[Dict[str, object]] = None,
) -> TrainingResult:
    """Convenience wrapper around :class:`Trainer`."""
    trainer = Trainer(
        model,
        config,
        examples,
        ledger=ledger,
        run_config_json=json.dumps(run_config or {}, sort_keys=True, default=str),
    )
    return trainer.train(checkpoint)
