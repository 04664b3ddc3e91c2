"""Command-line entry point for diarlite."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Type

from pydantic import ValidationError

from diarlite import __version__
from diarlite.app.commands.base import Command
from diarlite.app.commands.diarize import DiarizeCommand
from diarlite.app.commands.score import ScoreCommand
from diarlite.app.commands.synth import SynthCommand
from diarlite.app.commands.train import TrainCommand
from diarlite.errors import ConfigError, DataError
from diarlite.utils.config import load_run_config
from diarlite.utils.log import setup_logging

logger = logging.getLogger(__name__)

COMMANDS: Dict[str, Type[Command]] = {
    cls.name: cls for cls in (SynthCommand, TrainCommand, DiarizeCommand, ScoreCommand)
}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(ConfigError):
    """Bad command-line usage."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _global_options() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument(
        "--config", type=Path, help="JSON config file ($DIARLITE_CONFIG)"
    )
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Dotted config override, e.g. pipeline.window_sec=0.3; repeatable",
    )
    common.add_argument(
        "--work-dir", type=Path, help="Working directory for all artifacts"
    )
    common.add_argument("--seed", type=int, help="Seed for every random stage")
    common.add_argument("--jobs", type=int, help="Worker threads")
    common.add_argument("--log-level", default="INFO", help="Logging level")
    common.add_argument("--log-file", type=Path, help="Also log to this file")
    common.add_argument(
        "-v", "--verbose", action="store_true", help="Shortcut for --log-level DEBUG"
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = _Parser(
        prog="diarlite", description="Speaker-attributed ASR diarization toolkit"
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for name, cls in COMMANDS.items():
        sub = subparsers.add_parser(
            name, parents=[common], help=cls.help, description=cls.help
        )
        cls.add_arguments(sub)
    return parser


def config_overrides(args: argparse.Namespace, command: Type[Command]) -> List[str]:
    """Flag-derived overrides followed by explicit ``--set`` ones, which win."""
    out: List[str] = []
    if args.work_dir is not None:
        out.append(f"paths.work_dir={args.work_dir}")
    if args.seed is not None:
        for section in ("model", "synth", "train", "pipeline"):
            out.append(f"{section}.seed={args.seed}")
    if args.jobs is not None:
        out.append(f"pipeline.jobs={args.jobs}")
    out.extend(command.overrides(args))
    out.extend(args.overrides)
    return out


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, configure and run one command.

    Returns:
        0 on success, 1 on usage or configuration errors, 2 on data or I/O
        errors, 3 on anything else.
    """
    try:
        args = build_parser().parse_args(argv)
        setup_logging("DEBUG" if args.verbose else args.log_level, args.log_file)
        command_cls = COMMANDS[args.command]
        config = load_run_config(args.config, config_overrides(args, command_cls))
        return command_cls(config, args).run()
    except (ConfigError, ValidationError) as e:
        print(f"diarlite: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as e:
        print(f"diarlite: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        print("diarlite: interrupted", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"diarlite: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> int:
    """Console script entry point."""
    return run()


if __name__ == "__main__":
    sys.exit(main())
