"""Start/end time estimation heads over the decoder's source attention.

For every ASR decoder layer ``l`` four ``(f^se, f^h)`` matrices project the
decoder query state and the encoder output into a subspace. Dot products are
summed over layers, scaled by ``1/sqrt(f^se)`` and only then normalized with
a single softmax over encoder frames.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from diarlite.errors import NumericError
from diarlite.numeric import ops
from diarlite.numeric.nn import Module, init_uniform, parameter
from diarlite.numeric.tensor import Tensor

FrameSpan = Tuple[int, int]

TIME_HEAD_FAMILIES = ("start_query", "start_key", "end_query", "end_key")


class TimeHeadLayer(Module):
    """Projections of one decoder layer.

    Query projections start at zero so the initial posteriors are uniform;
    key projections use the regular uniform init so the query weights get a
    gradient from the first step.
    """

    def __init__(
        self,
        hidden_dim: int,
        subspace_dim: int,
        rng: np.random.Generator,
        dtype: np.dtype = np.float64,
    ) -> None:
        shape = (subspace_dim, hidden_dim)
        self.start_query = parameter(np.zeros(shape, dtype=dtype))
        self.start_key = parameter(init_uniform(rng, shape, hidden_dim, dtype))
        self.end_query = parameter(np.zeros(shape, dtype=dtype))
        self.end_key = parameter(init_uniform(rng, shape, hidden_dim, dtype))


class TimeHeads(Module):
    """Time-head projections for all ASR decoder layers."""

    def __init__(
        self,
        num_layers: int,
        hidden_dim: int,
        subspace_dim: int,
        rng: np.random.Generator,
        dtype: np.dtype = np.float64,
    ) -> None:
        self.subspace_dim = subspace_dim
        self.layers = [
            TimeHeadLayer(hidden_dim, subspace_dim, rng, dtype)
            for _ in range(num_layers)
        ]


@dataclass
class TimeLogits:
    """Pre-softmax start/end scores, each ``(num_queries, l^h)``."""

    start: Tensor
    end: Tensor


@dataclass
class TimePosterior:
    """Start/end frame distributions, each row summing to 1."""

    start: np.ndarray
    end: np.ndarray

    def argmax_frames(self) -> List[FrameSpan]:
        """Most probable (start, end) frame per token; ties go to the lowest frame."""
        starts = np.argmax(self.start, axis=-1)
        ends = np.argmax(self.end, axis=-1)
        return [(int(s), int(e)) for s, e in zip(starts, ends)]


def _family_scores(
    queries: Sequence[Tensor],
    h_asr: Tensor,
    heads: TimeHeads,
    query_attr: str,
    key_attr: str,
) -> Tensor:
    total: Optional[Tensor] = None
    for z, layer in zip(queries, heads.layers):
        q = ops.matmul(z, ops.transpose(getattr(layer, query_attr)))
        k = ops.matmul(h_asr, ops.transpose(getattr(layer, key_attr)))
        scores = ops.matmul(q, ops.transpose(k))
        total = scores if total is None else ops.add(total, scores)
    return ops.scale(total, 1.0 / math.sqrt(heads.subspace_dim))


def time_logits(
    queries: Sequence[Tensor], h_asr: Tensor, heads: TimeHeads
) -> TimeLogits:
    """Layer-accumulated start/end scores.

    Args:
        queries: Per decoder layer, the post-self-attention state ``(n, f^h)``.
        h_asr: Encoder output ``(l^h, f^h)``.
        heads: Time-head projections.

    Returns:
        Start and end logits, ``(n, l^h)`` each.

    Raises:
        NumericError: If the number of query layers differs from the heads.
    """
    if len(queries) != len(heads.layers):
        raise NumericError(
            f"{len(queries)} decoder layers of queries for "
            f"{len(heads.layers)} time-head layers"
        )
    return TimeLogits(
        start=_family_scores(queries, h_asr, heads, "start_query", "start_key"),
        end=_family_scores(queries, h_asr, heads, "end_query", "end_key"),
    )


def time_attention(
    queries: Sequence[Tensor], h_asr: Tensor, heads: TimeHeads
) -> TimePosterior:
    """Start/end frame posteriors for each query position."""
    logits = time_logits(queries, h_asr, heads)
    return TimePosterior(
        start=ops.softmax_array(logits.start.data),
        end=ops.softmax_array(logits.end.data),
    )


def time_ce_loss(logits: TimeLogits, timings: Sequence[Optional[FrameSpan]]) -> Tensor:
    """Summed start and end cross entropy over timed tokens.

    Tokens whose timing is None (``<sc>``, ``<eos>``) contribute nothing.

    Raises:
        DataError: If a reference frame lies outside ``[0, l^h)``.
    """
    starts = [-1 if span is None else span[0] for span in timings]
    ends = [-1 if span is None else span[1] for span in timings]
    return ops.add(
        ops.softmax_cross_entropy(logits.start, starts, ignore_index=-1),
        ops.softmax_cross_entropy(logits.end, ends, ignore_index=-1),
    )
