"""Synthetic speakers and the toy embedding extractor."""

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np
from scipy.stats import ortho_group

from diarlite.errors import ConfigError, DataError
from diarlite.utils.fileio import atomic_write_bytes

logger = logging.getLogger(__name__)

_MAX_DRAWS = 100_000


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


@dataclass
class SpeakerInventory:
    """Speaker signatures, token patterns and the profile projection.

    Attributes:
        ids: Speaker labels.
        signatures: ``(S, f^a)`` per-speaker offsets added to every frame.
        patterns: ``(|V|, f^a)`` per-token feature patterns.
        projection: ``(f^d, f^a)`` map from mean feature to profile space.
    """

    ids: List[str]
    signatures: np.ndarray
    patterns: np.ndarray
    projection: np.ndarray

    @classmethod
    def generate(
        cls,
        num_speakers: int,
        feat_dim: int,
        profile_dim: int,
        vocab_size: int,
        seed: int = 0,
        signature_scale: float = 2.0,
        pattern_scale: float = 1.0,
        max_cosine: float = 0.3,
    ) -> "SpeakerInventory":
        """Draw a reproducible inventory.

        Signatures are rejection-sampled so every pair has cosine below
        ``max_cosine``.

        Raises:
            ConfigError: If the cosine bound cannot be met.
        """
        rng = np.random.default_rng(seed)
        signatures: List[np.ndarray] = []
        draws = 0
        while len(signatures) < num_speakers:
            draws += 1
            if draws > _MAX_DRAWS:
                raise ConfigError(
                    f"Could not draw {num_speakers} signatures in {feat_dim} dims "
                    f"with pairwise cosine < {max_cosine}"
                )
            candidate = _unit(rng.standard_normal(feat_dim))
            if all(float(candidate @ s) < max_cosine for s in signatures):
                signatures.append(candidate)
        logger.debug("Drew %d signatures in %d attempts", num_speakers, draws)

        patterns = np.stack(
            [_unit(rng.standard_normal(feat_dim)) for _ in range(vocab_size)]
        )
        size = max(feat_dim, profile_dim)
        basis = ortho_group.rvs(size, random_state=rng) if size > 1 else np.ones((1, 1))
        projection = basis[:profile_dim, :feat_dim]
        return cls(
            ids=[f"S{i:03d}" for i in range(num_speakers)],
            signatures=np.stack(signatures) * signature_scale,
            patterns=patterns * pattern_scale,
            projection=projection,
        )

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def feat_dim(self) -> int:
        return self.signatures.shape[1]

    @property
    def profile_dim(self) -> int:
        return self.projection.shape[0]

    def profile(self, speaker: int) -> np.ndarray:
        """Clean profile of a speaker: its signature through the extractor."""
        return extract_profile(self.signatures[speaker][None, :], self.projection)


def extract_profile(frames: np.ndarray, projection: np.ndarray) -> np.ndarray:
    """Toy speaker-embedding extractor.

    Projects the mean frame into profile space and scales it to unit norm.

    Args:
        frames: ``(n, f^a)`` window, n >= 1.
        projection: ``(f^d, f^a)`` projection.

    Returns:
        Unit-norm ``(f^d,)`` embedding.

    Raises:
        DataError: If the window is empty or projects to zero.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise DataError("Cannot extract a profile from an empty window")
    vector = projection @ frames.mean(axis=0)
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise DataError("Window projects to a zero embedding")
    return vector / norm


def save_inventory(inventory: SpeakerInventory, path: Union[str, Path]) -> Path:
    """Write an inventory as an ``.npz`` archive atomically."""
    buffer = io.BytesIO()
    np.savez(
        buffer,
        ids=np.array(inventory.ids),
        signatures=inventory.signatures,
        patterns=inventory.patterns,
        projection=inventory.projection,
    )
    return atomic_write_bytes(path, buffer.getvalue())


def load_inventory(path: Union[str, Path]) -> SpeakerInventory:
    """Read an inventory written by :func:`save_inventory`.

    Raises:
        DataError: If the file is missing or lacks a field.
    """
    try:
        with np.load(path, allow_pickle=False) as archive:
            return SpeakerInventory(
                ids=[str(i) for i in archive["ids"]],
                signatures=archive["signatures"],
                patterns=archive["patterns"],
                projection=archive["projection"],
            )
    except (OSError, KeyError, ValueError) as e:
        raise DataError(f"Unable to read speaker inventory {path}: {e}") from e
