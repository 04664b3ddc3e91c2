"""Parameter checkpoints: ``.npz`` archives with a versioned JSON header."""

import io
import json
import logging
import zipfile
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from diarlite.errors import CheckpointError
from diarlite.numeric.nn import Module

logger = logging.getLogger(__name__)

FORMAT_NAME = "diarlite-checkpoint"
FORMAT_VERSION = 1
_HEADER_KEY = "__header__"


def save_checkpoint(
    path: Union[str, Path],
    params: Mapping[str, np.ndarray],
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write parameters to an ``.npz`` archive atomically.

    Args:
        path: Destination file.
        params: Parameter name -> array.
        metadata: Extra JSON-serializable header fields (e.g. model config).

    Returns:
        The written path.
    """
    from diarlite.utils.fileio import atomic_write_bytes

    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "parameters": {
            name: list(array.shape) for name, array in sorted(params.items())
        },
        "metadata": metadata or {},
    }
    buffer = io.BytesIO()
    arrays = {name: np.asarray(array) for name, array in params.items()}
    arrays[_HEADER_KEY] = np.frombuffer(
        json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    np.savez(buffer, **arrays)
    target = atomic_write_bytes(Path(path), buffer.getvalue())
    logger.info("Saved checkpoint with %d tensors to %s", len(params), target)
    return target


def load_checkpoint(
    path: Union[str, Path],
) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Read a checkpoint archive.

    Returns:
        Tuple of (name -> array, header metadata).

    Raises:
        CheckpointError: If the file is missing, unreadable or of another format.
    """
    try:
        with np.load(Path(path), allow_pickle=False) as archive:
            if _HEADER_KEY not in archive.files:
                raise CheckpointError(f"{path} has no checkpoint header")
            header = json.loads(archive[_HEADER_KEY].tobytes().decode("utf-8"))
            params = {
                name: archive[name] for name in archive.files if name != _HEADER_KEY
            }
    except (OSError, ValueError, zipfile.BadZipFile) as e:
        raise CheckpointError(f"Unable to read checkpoint {path}: {e}") from e
    if header.get("format") != FORMAT_NAME:
        raise CheckpointError(f"{path} is not a {FORMAT_NAME} file")
    if header.get("version", 0) > FORMAT_VERSION:
        raise CheckpointError(
            f"{path} has format version {header['version']}, "
            f"newest supported is {FORMAT_VERSION}"
        )
    return params, header.get("metadata", {})


def load_into(module: Module, params: Mapping[str, np.ndarray]) -> None:
    """Copy checkpoint arrays into a module's parameters.

    Raises:
        CheckpointError: Listing every missing, unexpected or mis-shaped tensor.
    """
    expected = dict(module.named_parameters())
    diff: Dict[str, Tuple[Optional[tuple], Optional[tuple]]] = {}
    for name, tensor in expected.items():
        found = params.get(name)
        if found is None:
            diff[name] = (tensor.shape, None)
        elif found.shape != tensor.shape:
            diff[name] = (tensor.shape, found.shape)
    for name, array in params.items():
        if name not in expected:
            diff[name] = (None, array.shape)
    if diff:
        raise CheckpointError(
            "Checkpoint is incompatible with the model", shape_diff=diff
        )
    for name, tensor in expected.items():
        tensor.data = np.array(params[name], dtype=tensor.dtype, copy=True)
