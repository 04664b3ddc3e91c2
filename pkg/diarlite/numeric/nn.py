"""Parameter containers and transformer building blocks."""

import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from diarlite.errors import NumericError
from diarlite.numeric import ops
from diarlite.numeric.tensor import Tensor


class Module:
    """Base class for anything that owns parameters.

    Parameters are the :class:`Tensor` attributes with ``requires_grad``;
    submodules are :class:`Module` attributes or lists of modules. Names are
    dotted attribute paths, e.g. ``asr_decoder.layers.0.self_attn.w_q``.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        """Yield (dotted name, parameter) pairs in attribute order."""
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix=f"{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(prefix=f"{name}.{i}.")
                    elif isinstance(item, Tensor) and item.requires_grad:
                        yield f"{name}.{i}", item

    def parameters(self) -> List[Tensor]:
        """List all parameters."""
        return [p for _, p in self.named_parameters()]

    def assign_names(self) -> None:
        """Write each parameter's dotted name onto the tensor."""
        for name, param in self.named_parameters():
            param.name = name

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Copy parameter values into a name -> array mapping."""
        return {name: param.data.copy() for name, param in self.named_parameters()}


def init_uniform(
    rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, dtype: np.dtype
) -> np.ndarray:
    """Uniform init in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def parameter(values: np.ndarray) -> Tensor:
    """Wrap an array as a trainable leaf."""
    return Tensor(values, requires_grad=True)


class Linear(Module):
    """Affine map ``y = x W^T + b`` with ``W`` stored as (out, in)."""

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        dtype: np.dtype = np.float64,
        bias: bool = True,
        zero_init: bool = False,
    ) -> None:
        shape = (out_dim, in_dim)
        weight = (
            np.zeros(shape, dtype=dtype)
            if zero_init
            else init_uniform(rng, shape, in_dim, dtype)
        )
        self.weight = parameter(weight)
        self.bias = parameter(np.zeros(out_dim, dtype=dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = ops.matmul(x, ops.transpose(self.weight))
        if self.bias is not None:
            out = ops.add(out, self.bias)
        return out


class LayerNorm(Module):
    """Layer normalization with learned gain and bias."""

    def __init__(
        self, dim: int, dtype: np.dtype = np.float64, eps: float = 1e-8
    ) -> None:
        self.gamma = parameter(np.ones(dim, dtype=dtype))
        self.beta = parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)


class Embedding(Module):
    """Token embedding table."""

    def __init__(
        self,
        num: int,
        dim: int,
        rng: np.random.Generator,
        dtype: np.dtype = np.float64,
    ) -> None:
        init = init_uniform(rng, (num, dim), dim, dtype)
        self.table = parameter(init * math.sqrt(dim))
        self.dim = dim

    def __call__(self, ids: np.ndarray) -> Tensor:
        return ops.embedding(self.table, ids)


def sinusoidal_encoding(
    length: int, dim: int, dtype: np.dtype = np.float64
) -> np.ndarray:
    """Absolute sinusoidal positional encoding, shape ``(length, dim)``."""
    position = np.arange(length, dtype=np.float64)[:, None]
    div = np.exp(np.arange(0, dim, 2, dtype=np.float64) * (-math.log(10000.0) / dim))
    table = np.zeros((length, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(position * div)
    table[:, 1::2] = np.cos(position * div[: dim // 2])
    return table.astype(dtype)


def add_positional_encoding(x: Tensor) -> Tensor:
    """Add the sinusoidal encoding to a ``(length, dim)`` sequence."""
    length, dim = x.shape
    return ops.add(x, Tensor(sinusoidal_encoding(length, dim, x.dtype)))


@dataclass
class AttentionWeights:
    """Projection matrices of one multi-head attention block, each (out, in)."""

    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_o: Tensor


def multi_head_attention(
    query: Tensor,
    key: Tensor,
    value: Tensor,
    heads: int,
    weights: AttentionWeights,
    causal: bool = False,
) -> Tuple[Tensor, np.ndarray]:
    """Multi-head attention with learned projections.

    Args:
        query: ``(n_q, d)`` query rows.
        key: ``(n_k, d)`` key rows.
        value: ``(n_k, d)`` value rows.
        heads: Head count; must divide ``d``.
        weights: Projection matrices.
        causal: Restrict each query to keys at or before its position.

    Returns:
        Tuple of (``(n_q, d)`` output, per-head attention weights).

    Raises:
        NumericError: On dimension mismatch.
    """
    if key.shape[0] != value.shape[0]:
        raise NumericError(
            f"key and value lengths differ: {key.shape[0]} vs {value.shape[0]}"
        )
    q = ops.matmul(query, ops.transpose(weights.w_q))
    k = ops.matmul(key, ops.transpose(weights.w_k))
    v = ops.matmul(value, ops.transpose(weights.w_v))
    context, attn = ops.attention(q, k, v, heads, causal=causal)
    return ops.matmul(context, ops.transpose(weights.w_o)), attn


class MultiHeadAttention(Module):
    """Multi-head attention block owning its projections."""

    def __init__(
        self,
        dim: int,
        heads: int,
        rng: np.random.Generator,
        dtype: np.dtype = np.float64,
    ) -> None:
        if dim % heads:
            raise NumericError(f"model dim {dim} is not divisible by {heads} heads")
        self.heads = heads
        self.w_q = parameter(init_uniform(rng, (dim, dim), dim, dtype))
        self.w_k = parameter(init_uniform(rng, (dim, dim), dim, dtype))
        self.w_v = parameter(init_uniform(rng, (dim, dim), dim, dtype))
        self.w_o = parameter(init_uniform(rng, (dim, dim), dim, dtype))

    @property
    def weights(self) -> AttentionWeights:
        return AttentionWeights(self.w_q, self.w_k, self.w_v, self.w_o)

    def __call__(
        self, query: Tensor, key: Tensor, value: Tensor, causal: bool = False
    ) -> Tensor:
        out, _ = multi_head_attention(
            query, key, value, self.heads, self.weights, causal
        )
        return out


class FeedForward(Module):
    """Position-wise two-layer ReLU network."""

    def __init__(
        self,
        dim: int,
        hidden: int,
        rng: np.random.Generator,
        dtype: np.dtype = np.float64,
    ) -> None:
        self.inner = Linear(dim, hidden, rng, dtype)
        self.outer = Linear(hidden, dim, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return self.outer(ops.relu(self.inner(x)))


def count_parameters(module: Module, names: Optional[List[str]] = None) -> int:
    """Count scalar parameters, optionally restricted to ``names``."""
    total = 0
    for name, param in module.named_parameters():
        if names is None or name in names:
            total += param.data.size
    return total
