"""Repository pattern implementation for ledger operations."""

from typing import Dict, Iterable, List, Optional

from sqlalchemy import func
from sqlalchemy.orm import Session

from .models import LossRecord, ScoreRecord, TrainingRun


class BaseRepository:
    """Base repository class with common database operations."""

    def __init__(self, session: Session) -> None:
        """Initialize repository with database session.

        Args:
            session: SQLAlchemy database session.
        """
        self.session = session


class RunRepository(BaseRepository):
    """Repository for training runs."""

    def create(
        self,
        name: str,
        config_json: str,
        seed: int = 0,
        stage1_steps: int = 0,
        stage2_steps: int = 0,
    ) -> TrainingRun:
        """Create a new run.

        Args:
            name: Run label.
            config_json: Full run configuration as JSON text.
            seed: Training seed.
            stage1_steps: Planned stage-1 steps.
            stage2_steps: Planned stage-2 steps.

        Returns:
            Created run instance.
        """
        run = TrainingRun(
            name=name,
            config_json=config_json,
            seed=seed,
            stage1_steps=stage1_steps,
            stage2_steps=stage2_steps,
        )
        self.session.add(run)
        self.session.commit()
        self.session.refresh(run)
        return run

    def get_by_id(self, run_id: int) -> Optional[TrainingRun]:
        return self.session.query(TrainingRun).filter(TrainingRun.id == run_id).first()

    def get_all(self) -> List[TrainingRun]:
        """Get all runs, newest first."""
        return self.session.query(TrainingRun).order_by(TrainingRun.id.desc()).all()

    def finish(
        self, run_id: int, final_loss: Optional[float], checkpoint_path: Optional[str]
    ) -> Optional[TrainingRun]:
        """Record the outcome of a run.

        Returns:
            The updated run, or None if not found.
        """
        run = self.get_by_id(run_id)
        if run is None:
            return None
        run.final_loss = final_loss
        run.checkpoint_path = checkpoint_path
        self.session.commit()
        self.session.refresh(run)
        return run


class LossRepository(BaseRepository):
    """Repository for per-step losses."""

    def add_many(self, run_id: int, records: Iterable[Dict[str, float]]) -> int:
        """Insert loss rows.

        Args:
            run_id: Owning run.
            records: Dicts with ``stage``, ``step``, ``nll``, ``time_ce`` and ``total``.

        Returns:
            Number of rows inserted.
        """
        rows = [
            LossRecord(
                run_id=run_id,
                stage=int(r["stage"]),
                step=int(r["step"]),
                nll=float(r["nll"]),
                time_ce=float(r.get("time_ce", 0.0)),
                total=float(r["total"]),
            )
            for r in records
        ]
        self.session.add_all(rows)
        self.session.commit()
        return len(rows)

    def get_by_run(self, run_id: int) -> List[LossRecord]:
        return (
            self.session.query(LossRecord)
            .filter(LossRecord.run_id == run_id)
            .order_by(LossRecord.stage, LossRecord.step)
            .all()
        )


class ScoreRepository(BaseRepository):
    """Repository for per-recording scores."""

    def add_many(self, records: Iterable[ScoreRecord]) -> int:
        """Insert score rows in one transaction.

        Returns:
            Number of rows inserted.
        """
        rows = list(records)
        self.session.add_all(rows)
        self.session.commit()
        return len(rows)

    def get_by_system(
        self, system: str, counting: Optional[str] = None
    ) -> List[ScoreRecord]:
        query = self.session.query(ScoreRecord).filter(ScoreRecord.system == system)
        if counting is not None:
            query = query.filter(ScoreRecord.counting == counting)
        return query.order_by(ScoreRecord.recording_id).all()

    def summary(self) -> List[Dict[str, object]]:
        """Speech-time weighted DER per system and counting mode."""
        weighted = func.sum(ScoreRecord.der * ScoreRecord.ref_speech_sec)
        speech = func.sum(ScoreRecord.ref_speech_sec)
        rows = (
            self.session.query(
                ScoreRecord.system,
                ScoreRecord.counting,
                func.count(ScoreRecord.id),
                weighted,
                speech,
            )
            .group_by(ScoreRecord.system, ScoreRecord.counting)
            .order_by(ScoreRecord.system, ScoreRecord.counting)
            .all()
        )
        return [
            {
                "system": system,
                "counting": counting,
                "recordings": count,
                "der": (total or 0.0) / speech_sec if speech_sec else 0.0,
            }
            for system, counting, count, total, speech_sec in rows
        ]
