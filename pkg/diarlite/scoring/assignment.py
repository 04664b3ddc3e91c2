"""Optimal one-to-one speaker mapping."""

from itertools import permutations
from typing import Dict

import numpy as np
from scipy.optimize import linear_sum_assignment

from diarlite.errors import DataError


def map_speakers_optimal(overlap: np.ndarray) -> Dict[int, int]:
    """Reference row -> hypothesis column mapping maximizing the matched total.

    Rows or columns left over when the matrix is not square stay unmapped.

    Raises:
        DataError: On negative or non-finite entries.
    """
    overlap = np.asarray(overlap, dtype=np.float64)
    if overlap.ndim != 2:
        raise DataError(f"Overlap matrix must be 2-D, got shape {overlap.shape}")
    if overlap.size == 0:
        return {}
    if not np.all(np.isfinite(overlap)) or (overlap < 0).any():
        raise DataError("Overlap matrix must be finite and nonnegative")
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return {int(r): int(c) for r, c in zip(rows, cols)}


def brute_force_mapping(overlap: np.ndarray) -> Dict[int, int]:
    """Exhaustive counterpart of :func:`map_speakers_optimal` for small matrices.

    Ties keep the lexicographically first permutation.
    """
    overlap = np.asarray(overlap, dtype=np.float64)
    n_ref, n_hyp = overlap.shape
    size = max(n_ref, n_hyp)
    padded = np.zeros((size, size))
    padded[:n_ref, :n_hyp] = overlap
    best_total, best = -1.0, None
    for perm in permutations(range(size)):
        total = float(sum(padded[r, perm[r]] for r in range(size)))
        if total > best_total:
            best_total, best = total, perm
    return {r: c for r, c in enumerate(best) if r < n_ref and c < n_hyp}


def matched_total(overlap: np.ndarray, mapping: Dict[int, int]) -> float:
    return float(sum(overlap[r, c] for r, c in mapping.items()))
