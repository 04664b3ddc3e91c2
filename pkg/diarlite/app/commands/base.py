"""Shared command plumbing."""

import argparse
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Optional

from diarlite.data.db import DatabaseManager
from diarlite.utils.config import RunConfig

logger = logging.getLogger(__name__)


class Command(ABC):
    """One CLI workflow, configured by a validated :class:`RunConfig`."""

    name: str = ""
    help: str = ""

    def __init__(self, config: RunConfig, args: argparse.Namespace) -> None:
        self.config = config
        self.args = args

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        """Register command-specific flags."""

    @classmethod
    def overrides(cls, args: argparse.Namespace) -> List[str]:
        """Dotted config overrides implied by command flags."""
        return []

    @abstractmethod
    def run(self) -> int:
        """Execute the workflow and return the exit code."""

    @property
    def data_dir(self) -> Path:
        return self.config.paths.resolved_data_dir()

    @property
    def output_dir(self) -> Path:
        return self.config.paths.resolved_output_dir()

    def ledger(self) -> Optional[DatabaseManager]:
        """The experiment ledger, or None with ``--no-ledger``."""
        if getattr(self.args, "no_ledger", False):
            return None
        return DatabaseManager(self.config.paths.resolved_ledger_url())
