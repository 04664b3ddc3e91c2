"""Atomic file writes and JSON helpers."""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator, List, Union

from diarlite.errors import DataError
from diarlite.utils.formatters import round_floats

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    """Write bytes to ``path`` via a temporary file and rename.

    Args:
        path: Destination path; parent directories are created.
        payload: Bytes to write.

    Returns:
        The destination path.

    Raises:
        DataError: If the destination is not writable.
    """
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(payload)
            os.replace(tmp_name, target)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as e:
        raise DataError(f"Unable to write {target}: {e}") from e
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write UTF-8 text atomically."""
    return atomic_write_bytes(path, text.encode("utf-8"))


def dumps_json(obj: Any, significant: int = 6) -> str:
    """Serialize to deterministic JSON with floats fixed to ``significant`` digits."""
    return json.dumps(round_floats(obj, significant), sort_keys=True, indent=2) + "\n"


def write_json(path: PathLike, obj: Any, significant: int = 6) -> Path:
    """Write deterministic JSON atomically."""
    return atomic_write_text(path, dumps_json(obj, significant))


def read_json(path: PathLike) -> Any:
    """Read a JSON file.

    Raises:
        DataError: If the file is missing or not valid JSON.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"Unable to read JSON from {path}: {e}") from e


def write_jsonl(path: PathLike, records: Iterable[Any]) -> Path:
    """Write one compact JSON object per line, atomically."""
    lines = [
        json.dumps(record, sort_keys=True, separators=(",", ":")) for record in records
    ]
    return atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_jsonl(path: PathLike) -> List[Any]:
    """Read a JSON-lines file, reporting the failing line number."""
    return list(iter_jsonl(path))


def iter_jsonl(path: PathLike) -> Iterator[Any]:
    """Iterate over the records of a JSON-lines file.

    Raises:
        DataError: If the file is missing or a line is not valid JSON.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as e:
                    raise DataError(f"{path}:{line_no}: invalid JSON: {e}") from e
    except OSError as e:
        raise DataError(f"Unable to read {path}: {e}") from e
