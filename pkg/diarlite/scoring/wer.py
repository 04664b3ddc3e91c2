"""Word error rate and concatenated minimum-permutation WER (cpWER)."""

from dataclasses import dataclass, field
from itertools import permutations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class EditCounts:
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    ref_len: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self) -> float:
        """Errors in percent of ``max(1, ref_len)``."""
        return 100.0 * self.errors / max(1, self.ref_len)

    def __add__(self, other: "EditCounts") -> "EditCounts":
        return EditCounts(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_len + other.ref_len,
        )


def edit_distance_matrix(ref: Sequence[str], hyp: Sequence[str]) -> np.ndarray:
    """Levenshtein table with unit costs."""
    d = np.zeros((len(ref) + 1, len(hyp) + 1), dtype=np.int64)
    d[:, 0] = np.arange(len(ref) + 1)
    d[0, :] = np.arange(len(hyp) + 1)
    for i in range(1, len(ref) + 1):
        for j in range(1, len(hyp) + 1):
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            d[i, j] = min(d[i - 1, j - 1] + cost, d[i - 1, j] + 1, d[i, j - 1] + 1)
    return d


def wer(ref: Sequence[str], hyp: Sequence[str]) -> EditCounts:
    """Edit counts of ``hyp`` against ``ref``.

    The backtrace prefers a match or substitution, then a deletion, then an
    insertion.
    """
    d = edit_distance_matrix(ref, hyp)
    i, j = len(ref), len(hyp)
    subs = dels = ins = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            if d[i, j] == d[i - 1, j - 1] + cost:
                subs += cost
                i, j = i - 1, j - 1
                continue
        if i > 0 and d[i, j] == d[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditCounts(subs, dels, ins, len(ref))


@dataclass
class CpwerResult:
    """Best speaker pairing and its summed edit counts.

    ``pairs`` maps each reference speaker to its hypothesis speaker (None
    when paired with padding); ``unmatched_hyp`` are hypothesis speakers
    paired with padding, whose words count as insertions.
    """

    counts: EditCounts
    hyp_words: int
    pairs: Dict[str, Optional[str]] = field(default_factory=dict)
    unmatched_hyp: List[str] = field(default_factory=list)
    per_speaker: Dict[str, EditCounts] = field(default_factory=dict)

    @property
    def errors(self) -> int:
        return self.counts.errors

    @property
    def ref_words(self) -> int:
        return self.counts.ref_len

    @property
    def cpwer(self) -> float:
        return self.counts.rate


def _best_permutation(cost: np.ndarray) -> Tuple[int, ...]:
    # Lexicographic order; the first minimum wins.
    best, best_total = None, None
    for perm in permutations(range(cost.shape[0])):
        total = int(sum(cost[i, perm[i]] for i in range(len(perm))))
        if best_total is None or total < best_total:
            best, best_total = perm, total
    return best


def cpwer(
    ref: Mapping[str, Sequence[str]],
    hyp: Mapping[str, Sequence[str]],
    brute_force_max_speakers: int = 8,
) -> CpwerResult:
    """Minimum total WER over one-to-one speaker pairings.

    The smaller side is padded with empty speakers. Pairings are searched
    exhaustively up to ``brute_force_max_speakers`` and by assignment
    solving beyond.
    """
    ref_ids = sorted(ref)
    hyp_ids = sorted(hyp)
    size = max(len(ref_ids), len(hyp_ids), 1)
    ref_seqs: List[Sequence[str]] = [ref[s] for s in ref_ids]
    ref_seqs += [[]] * (size - len(ref_ids))
    hyp_seqs: List[Sequence[str]] = [hyp[s] for s in hyp_ids]
    hyp_seqs += [[]] * (size - len(hyp_ids))
    counts = [[wer(r, h) for h in hyp_seqs] for r in ref_seqs]
    cost = np.array([[c.errors for c in row] for row in counts], dtype=np.int64)

    if size <= brute_force_max_speakers:
        perm = _best_permutation(cost)
    else:
        rows, cols = linear_sum_assignment(cost)
        perm = tuple(int(c) for _, c in sorted(zip(rows, cols)))

    total = EditCounts()
    result = CpwerResult(counts=total, hyp_words=sum(len(h) for h in hyp_seqs))
    for r, h in enumerate(perm):
        total = total + counts[r][h]
        hyp_id = hyp_ids[h] if h < len(hyp_ids) else None
        if r < len(ref_ids):
            result.pairs[ref_ids[r]] = hyp_id
            result.per_speaker[ref_ids[r]] = counts[r][h]
        elif hyp_id is not None:
            result.unmatched_hyp.append(hyp_id)
    result.counts = total
    return result
