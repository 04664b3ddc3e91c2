"""SQLAlchemy models for the experiment ledger."""

from sqlalchemy import (
    Column,
    DateTime,
    Float,
    ForeignKey,
    Index,
    Integer,
    String,
    Text,
)
from sqlalchemy.orm import declarative_base, relationship
from sqlalchemy.sql import func

Base = declarative_base()


class TrainingRun(Base):
    """One invocation of the two-stage training schedule."""

    __tablename__ = "training_runs"

    id = Column(Integer, primary_key=True)
    name = Column(String(100), nullable=False)
    seed = Column(Integer, nullable=False, default=0)
    config_json = Column(Text, nullable=False)
    stage1_steps = Column(Integer, nullable=False, default=0)
    stage2_steps = Column(Integer, nullable=False, default=0)
    final_loss = Column(Float, nullable=True)
    checkpoint_path = Column(String(500), nullable=True)
    created_at = Column(DateTime, default=func.now())

    # Relationships
    losses = relationship(
        "LossRecord", back_populates="run", cascade="all, delete-orphan"
    )

    def __repr__(self) -> str:
        return f"<TrainingRun(id={self.id}, name='{self.name}', seed={self.seed})>"


class LossRecord(Base):
    """Loss values of one optimizer step."""

    __tablename__ = "loss_records"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("training_runs.id"), nullable=False)
    stage = Column(Integer, nullable=False)  # 1: NLL only, 2: NLL + time CE
    step = Column(Integer, nullable=False)
    nll = Column(Float, nullable=False)
    time_ce = Column(Float, nullable=False, default=0.0)
    total = Column(Float, nullable=False)

    # Relationships
    run = relationship("TrainingRun", back_populates="losses")

    # Indexes
    __table_args__ = (Index("idx_loss_run_stage_step", "run_id", "stage", "step"),)

    def __repr__(self) -> str:
        return f"<LossRecord(run={self.run_id}, stage={self.stage}, step={self.step})>"


class ScoreRecord(Base):
    """Scores of one recording under one system and counting mode."""

    __tablename__ = "score_records"

    id = Column(Integer, primary_key=True)
    recording_id = Column(String(200), nullable=False)
    system = Column(String(100), nullable=False)
    counting = Column(
        String(20), nullable=False, default="estimated"
    )  # oracle, estimated
    condition = Column(String(10), nullable=True)
    ser = Column(Float, nullable=False)
    miss = Column(Float, nullable=False)
    fa = Column(Float, nullable=False)
    der = Column(Float, nullable=False)
    cpwer = Column(Float, nullable=True)
    ref_speech_sec = Column(Float, nullable=False, default=0.0)
    created_at = Column(DateTime, default=func.now())

    # Indexes
    __table_args__ = (Index("idx_score_system", "system", "counting"),)

    def __repr__(self) -> str:
        return (
            f"<ScoreRecord(recording='{self.recording_id}', "
            f"system='{self.system}', der={self.der})>"
        )
