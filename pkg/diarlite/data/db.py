"""Ledger database initialization and session management."""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from .models import Base

logger = logging.getLogger(__name__)

DEFAULT_URL = "sqlite:///work/ledger.db"


class DatabaseManager:
    """Engine and session factory for one ledger URL."""

    def __init__(self, url: str = DEFAULT_URL) -> None:
        """Initialize the database manager.

        Args:
            url: SQLAlchemy URL; ``sqlite:///:memory:`` keeps the ledger in memory.
        """
        self.url = url
        self._engine: Optional[Engine] = None
        self._session_factory: Optional[sessionmaker] = None

    def get_engine(self) -> Engine:
        """Get or create the database engine."""
        if self._engine is None:
            connect_args = {}
            if self.url.startswith("sqlite"):
                path = self.url.split("sqlite:///", 1)[-1]
                if path and path != ":memory:":
                    Path(path).parent.mkdir(parents=True, exist_ok=True)
                connect_args = {"check_same_thread": False, "timeout": 30}
            self._engine = create_engine(
                self.url,
                echo=False,
                pool_pre_ping=True,
                connect_args=connect_args,
            )
        return self._engine

    def get_session_factory(self) -> sessionmaker:
        if self._session_factory is None:
            self._session_factory = sessionmaker(
                autocommit=False, autoflush=False, bind=self.get_engine()
            )
        return self._session_factory

    @contextmanager
    def session(self) -> Iterator[Session]:
        """Session that rolls back on error and always closes."""
        session = self.get_session_factory()()
        try:
            yield session
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def init_database(self) -> None:
        """Create all tables; safe to call repeatedly."""
        Base.metadata.create_all(bind=self.get_engine())
        logger.debug("Ledger ready at %s", self.url)

    def reset_database(self) -> None:
        """Drop and recreate all tables.

        WARNING: This will delete all data!
        """
        engine = self.get_engine()
        Base.metadata.drop_all(bind=engine)
        Base.metadata.create_all(bind=engine)
