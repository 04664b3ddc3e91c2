"""Spectral clustering with normalized maximum eigengap (NME) speaker counting.

The cosine affinity matrix is min-max scaled, each row keeps its top ``p``
entries (itself included) as ones, and the result is symmetrized. For every
candidate ``p`` the unnormalized Laplacian spectrum gives an eigengap-based
speaker count and the ratio ``g_p = (p / N) / (max_gap / lambda_max)``; the
``p`` with the smallest ratio wins.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh
from scipy.sparse.csgraph import laplacian
from sklearn.cluster import k_means

from diarlite.errors import DataError
from diarlite.model.types import ProfileSet

logger = logging.getLogger(__name__)

_EPS = 1e-10


@dataclass
class ClusteringResult:
    labels: List[int]
    num_speakers: int
    p_value: int


def cosine_affinity(embeddings: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity scaled to ``[0, 1]``."""
    norms = np.linalg.norm(embeddings, axis=1, keepdims=True)
    unit = embeddings / np.maximum(norms, _EPS)
    sim = unit @ unit.T
    low, high = sim.min(), sim.max()
    if high - low < _EPS:
        return np.ones_like(sim)
    return (sim - low) / (high - low)


def binarize_top_p(affinity: np.ndarray, p_value: int) -> np.ndarray:
    """Keep the ``p_value`` largest entries of each row as ones, then symmetrize."""
    n = affinity.shape[0]
    graph = np.zeros_like(affinity)
    # Stable sort so that ties keep the lower column index.
    order = np.argsort(-affinity, axis=1, kind="stable")[:, :p_value]
    graph[np.repeat(np.arange(n), order.shape[1]), order.reshape(-1)] = 1.0
    return 0.5 * (graph + graph.T)


def laplacian_spectrum(graph: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvectors of the unnormalized Laplacian."""
    lap = laplacian(graph, normed=False)
    return eigh(lap)


def eigengap_count(eigenvalues: np.ndarray, max_speakers: int) -> Tuple[int, float]:
    """Speaker count at the largest gap among the first eigenvalues.

    Returns:
        The count and the largest gap normalized by the largest eigenvalue.
    """
    head = eigenvalues[: max_speakers + 1]
    if head.size < 2:
        return 1, 0.0
    gaps = np.diff(head)
    index = int(np.argmax(gaps))
    return index + 1, float(gaps[index] / (eigenvalues.max() + _EPS))


def select_p_value(
    affinity: np.ndarray, max_speakers: int, max_p_ratio: float = 0.25
) -> Tuple[int, int]:
    """Search ``p`` in ``1..max(1, floor(max_p_ratio * N))``.

    Returns:
        ``(p, estimated_count)`` minimizing ``g_p``.
    """
    n = affinity.shape[0]
    best = (np.inf, 1, 1)
    for p in range(1, max(1, int(np.floor(max_p_ratio * n))) + 1):
        eigenvalues, _ = laplacian_spectrum(binarize_top_p(affinity, p))
        count, gap = eigengap_count(eigenvalues, max_speakers)
        ratio = (p / n) / (gap + _EPS)
        if ratio < best[0]:
            best = (ratio, p, count)
    return best[1], best[2]


def relabel_by_appearance(labels: Sequence[int]) -> List[int]:
    """Rename labels to 0, 1, ... in order of first appearance."""
    mapping: Dict[int, int] = {}
    return [mapping.setdefault(int(label), len(mapping)) for label in labels]


def nme_spectral_cluster(
    embeddings: np.ndarray,
    num_speakers: Optional[int] = None,
    max_speakers: int = 8,
    max_p_ratio: float = 0.25,
    single_speaker_cosine: float = 0.9,
    restarts: int = 10,
    seed: int = 0,
) -> ClusteringResult:
    """Cluster embeddings, estimating the count unless ``num_speakers`` is given.

    Args:
        embeddings: ``(N, f^d)`` window embeddings.
        num_speakers: Oracle count; None estimates it.
        max_speakers: Largest count considered when estimating.
        max_p_ratio: Largest ``p`` as a fraction of N.
        single_speaker_cosine: When estimating, if every pair is at least this
            similar all windows go to one speaker.
        restarts: k-means restarts.
        seed: k-means seed.

    Raises:
        DataError: On no embeddings or a non-positive oracle count.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0:
        raise DataError("Clustering needs at least one embedding")
    if num_speakers is not None and num_speakers < 1:
        raise DataError(f"Oracle speaker count must be positive, got {num_speakers}")
    n = embeddings.shape[0]
    if n == 1:
        return ClusteringResult([0], 1, 1)

    affinity = cosine_affinity(embeddings)
    if num_speakers is None:
        unit = embeddings / np.linalg.norm(embeddings, axis=1, keepdims=True)
        sim = unit @ unit.T
        if sim[~np.eye(n, dtype=bool)].min() >= single_speaker_cosine:
            return ClusteringResult([0] * n, 1, 1)

    p_value, estimate = select_p_value(affinity, max_speakers, max_p_ratio)
    k = estimate if num_speakers is None else num_speakers
    if k > n:
        logger.warning(
            "Requested %d speakers but only %d embeddings; using %d", k, n, n
        )
        k = n
    if k == 1:
        return ClusteringResult([0] * n, 1, p_value)

    _, vectors = laplacian_spectrum(binarize_top_p(affinity, p_value))
    _, labels, _ = k_means(
        vectors[:, :k], n_clusters=k, n_init=restarts, random_state=seed
    )
    labels = relabel_by_appearance(labels)
    logger.info(
        "Clustered %d windows into %d speakers (p=%d)", n, len(set(labels)), p_value
    )
    return ClusteringResult(labels, len(set(labels)), p_value)


def cluster_centroids(embeddings: np.ndarray, labels: Sequence[int]) -> ProfileSet:
    """Unit-norm mean embedding of each cluster, ids ``spk0..spk{k-1}``.

    Raises:
        DataError: If a label in ``0..max(labels)`` has no member or a mean
            has zero norm.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if labels.size == 0 or labels.size != embeddings.shape[0]:
        raise DataError(f"{labels.size} labels for {embeddings.shape[0]} embeddings")
    vectors = []
    for k in range(int(labels.max()) + 1):
        members = embeddings[labels == k]
        if members.shape[0] == 0:
            raise DataError(f"Cluster {k} has no members")
        mean = members.mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < _EPS:
            raise DataError(f"Cluster {k} has a zero-norm mean")
        vectors.append(mean / norm)
    ids = [f"spk{k}" for k in range(len(vectors))]
    return ProfileSet.from_arrays(ids, np.stack(vectors))
