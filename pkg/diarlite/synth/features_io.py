"""Binary feature files.

Layout: the 4-byte magic ``DLF1``, uint32 row count, uint32 column count,
then row-major little-endian float32 values.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from diarlite.errors import DataError
from diarlite.model.types import AcousticFeatures
from diarlite.utils.fileio import atomic_write_bytes

MAGIC = b"DLF1"
_HEADER = struct.Struct("<4sII")


def encode_features(frames: np.ndarray) -> bytes:
    frames = np.asarray(frames)
    if frames.ndim != 2:
        raise DataError(f"Feature matrix must be 2-D, got shape {frames.shape}")
    rows, cols = frames.shape
    return _HEADER.pack(MAGIC, rows, cols) + frames.astype("<f4").tobytes()


def decode_features(payload: bytes) -> np.ndarray:
    """Decode a feature payload to a float64 ``(rows, cols)`` array.

    Raises:
        DataError: On a bad magic or a size that disagrees with the header.
    """
    if len(payload) < _HEADER.size:
        raise DataError("Feature file is shorter than its header")
    magic, rows, cols = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise DataError(f"Bad feature file magic {magic!r}")
    expected = _HEADER.size + rows * cols * 4
    if len(payload) != expected:
        raise DataError(
            f"Feature file holds {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4", offset=_HEADER.size)
    return data.reshape(rows, cols).astype(np.float64)


def write_features(path: Union[str, Path], features: AcousticFeatures) -> Path:
    return atomic_write_bytes(path, encode_features(features.frames))


def read_features(
    path: Union[str, Path], frame_period: float = 0.01
) -> AcousticFeatures:
    """Read a feature file.

    Raises:
        DataError: If the file is missing or malformed.
    """
    try:
        payload = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"Unable to read features {path}: {e}") from e
    return AcousticFeatures(decode_features(payload), frame_period)
