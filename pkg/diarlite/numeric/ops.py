"""Differentiable primitives.

Every op takes :class:`Tensor` inputs, computes its forward value with numpy
and, when a graph is active, records a backward closure. Matrices are
row-major ``(rows, features)``; row-wise ops (softmax, layer norm, l2
normalization) act on the last axis.
"""

import math
from typing import Sequence, Tuple, Union

import numpy as np

from diarlite.errors import DataError, NumericError
from diarlite.numeric.tensor import Tensor, apply_op

IntIndex = Union[int, Sequence[int], np.ndarray]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum with numpy broadcasting (e.g. bias rows)."""
    out = a.data + b.data

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return apply_op("add", (a, b), out, backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise difference with broadcasting."""
    out = a.data - b.data

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return apply_op("sub", (a, b), out, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with broadcasting."""
    out = a.data * b.data

    def backward(g: np.ndarray):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return apply_op("mul", (a, b), out, backward)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a constant."""
    out = a.data * factor

    def backward(g: np.ndarray):
        return (g * factor,)

    return apply_op("scale", (a,), out, backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors.

    Raises:
        NumericError: On inner-dimension mismatch.
    """
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise NumericError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward(g: np.ndarray):
        return g @ b.data.T, a.data.T @ g

    return apply_op("matmul", (a, b), out, backward)


def transpose(a: Tensor) -> Tensor:
    """Transpose a 2-D tensor."""
    out = a.data.T.copy()

    def backward(g: np.ndarray):
        return (g.T,)

    return apply_op("transpose", (a,), out, backward)


def reduce_sum(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    out = np.asarray(a.data.sum(), dtype=a.dtype)

    def backward(g: np.ndarray):
        return (np.full(a.shape, g, dtype=a.dtype),)

    return apply_op("reduce_sum", (a,), out, backward)


def relu(a: Tensor) -> Tensor:
    """Rectified linear unit."""
    mask = a.data > 0
    out = np.where(mask, a.data, 0.0).astype(a.dtype)

    def backward(g: np.ndarray):
        return (g * mask,)

    return apply_op("relu", (a,), out, backward)


def softmax_array(x: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis of a plain array."""
    shifted = x - np.max(x, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max subtraction.

    Raises:
        NumericError: If the input holds a non-finite value.
    """
    if not np.all(np.isfinite(a.data)):
        raise NumericError("softmax input must be finite")
    out = softmax_array(a.data)

    def backward(g: np.ndarray):
        return (out * (g - np.sum(g * out, axis=-1, keepdims=True)),)

    return apply_op("softmax", (a,), out, backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-8) -> Tensor:
    """Per-row layer normalization followed by an affine map."""
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv
    out = x_hat * gamma.data + beta.data

    def backward(g: np.ndarray):
        d_hat = g * gamma.data
        dx = inv * (
            d_hat
            - d_hat.mean(axis=-1, keepdims=True)
            - x_hat * np.mean(d_hat * x_hat, axis=-1, keepdims=True)
        )
        d_gamma = _unbroadcast(g * x_hat, gamma.shape)
        d_beta = _unbroadcast(g, beta.shape)
        return dx, d_gamma, d_beta

    return apply_op("layer_norm", (x, gamma, beta), out, backward)


def embedding(table: Tensor, ids: IntIndex) -> Tensor:
    """Look up rows of an embedding table.

    Raises:
        DataError: If an index is outside the table.
    """
    index = np.asarray(ids, dtype=np.int64).reshape(-1)
    size = table.shape[0]
    if index.size and (index.min() < 0 or index.max() >= size):
        raise DataError(f"unknown token index in {index.tolist()} (table size {size})")
    out = table.data[index]

    def backward(g: np.ndarray):
        grad = np.zeros_like(table.data)
        np.add.at(grad, index, g)
        return (grad,)

    return apply_op("embedding", (table,), out, backward)


def rows(x: Tensor, index: IntIndex) -> Tensor:
    """Select rows of a 2-D tensor, always returning a 2-D result."""
    idx = np.atleast_1d(np.asarray(index, dtype=np.int64))
    out = x.data[idx]

    def backward(g: np.ndarray):
        grad = np.zeros_like(x.data)
        np.add.at(grad, idx, g)
        return (grad,)

    return apply_op("rows", (x,), out, backward)


def l2_normalize(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row to unit norm; an all-zero row stays zero."""
    norm = np.sqrt(np.sum(x.data * x.data, axis=-1, keepdims=True) + eps)
    out = x.data / norm

    def backward(g: np.ndarray):
        return ((g - out * np.sum(g * out, axis=-1, keepdims=True)) / norm,)

    return apply_op("l2_normalize", (x,), out, backward)


def stack_frames(x: Tensor, factor: int) -> Tensor:
    """Concatenate each group of ``factor`` consecutive rows into one row.

    The last group is zero-padded, so ``n`` rows become ``ceil(n / factor)``.
    """
    n, dim = x.shape
    pad = (-n) % factor
    padded = np.concatenate([x.data, np.zeros((pad, dim), dtype=x.dtype)], axis=0)
    out = padded.reshape((n + pad) // factor, factor * dim)

    def backward(g: np.ndarray):
        return (g.reshape(n + pad, dim)[:n],)

    return apply_op("stack_frames", (x,), out, backward)


def attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: int,
    causal: bool = False,
) -> Tuple[Tensor, np.ndarray]:
    """Scaled dot-product attention split over ``heads``.

    Args:
        q: Queries, ``(n_q, d)``.
        k: Keys, ``(n_k, d)``.
        v: Values, ``(n_k, d)``.
        heads: Number of heads; must divide ``d``.
        causal: Mask keys after each query position (self-attention).

    Returns:
        Tuple of (output ``(n_q, d)``, attention weights ``(heads, n_q, n_k)``).

    Raises:
        NumericError: On dimension mismatch.
    """
    n_q, dim = q.shape
    n_k = k.shape[0]
    if k.shape[1] != dim or v.shape != k.shape:
        raise NumericError(
            f"attention shape mismatch: q {q.shape}, k {k.shape}, v {v.shape}"
        )
    if heads < 1 or dim % heads:
        raise NumericError(f"model dim {dim} is not divisible by {heads} heads")
    if causal and n_q != n_k:
        raise NumericError("causal attention needs as many queries as keys")
    head_dim = dim // heads
    factor = 1.0 / math.sqrt(head_dim)

    qh = q.data.reshape(n_q, heads, head_dim).transpose(1, 0, 2)
    kh = k.data.reshape(n_k, heads, head_dim).transpose(1, 0, 2)
    vh = v.data.reshape(n_k, heads, head_dim).transpose(1, 0, 2)

    scores = np.matmul(qh, kh.transpose(0, 2, 1)) * factor
    if causal:
        future = np.triu(np.ones((n_q, n_k), dtype=bool), k=1)
        scores = np.where(future[None], -np.inf, scores)
    weights = softmax_array(scores)
    out_h = np.matmul(weights, vh)
    out = out_h.transpose(1, 0, 2).reshape(n_q, dim)

    def backward(g: np.ndarray):
        gh = g.reshape(n_q, heads, head_dim).transpose(1, 0, 2)
        dv = np.matmul(weights.transpose(0, 2, 1), gh)
        dw = np.matmul(gh, vh.transpose(0, 2, 1))
        ds = weights * (dw - np.sum(dw * weights, axis=-1, keepdims=True))
        dq = np.matmul(ds, kh) * factor
        dk = np.matmul(ds.transpose(0, 2, 1), qh) * factor
        return (
            dq.transpose(1, 0, 2).reshape(n_q, dim),
            dk.transpose(1, 0, 2).reshape(n_k, dim),
            dv.transpose(1, 0, 2).reshape(n_k, dim),
        )

    return apply_op("attention", (q, k, v), out, backward), weights


def softmax_cross_entropy(
    logits: Tensor,
    targets: IntIndex,
    ignore_index: int = -1,
) -> Tensor:
    """Summed cross entropy of row-wise softmax against integer targets.

    Rows whose target equals ``ignore_index`` contribute nothing. The
    gradient with respect to the logits of a scored row is ``p - onehot``.

    Raises:
        DataError: If a target is outside ``[0, num_classes)``.
    """
    scores = logits.data if logits.data.ndim == 2 else logits.data.reshape(1, -1)
    target = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    n, classes = scores.shape
    if target.shape[0] != n:
        raise NumericError(f"{target.shape[0]} targets for {n} rows of logits")
    valid = target != ignore_index
    chosen = target[valid]
    if chosen.size and (chosen.min() < 0 or chosen.max() >= classes):
        raise DataError(f"target index out of range [0, {classes}): {chosen.tolist()}")

    shifted = scores - np.max(scores, axis=-1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    rows_idx = np.nonzero(valid)[0]
    out = np.asarray(-np.sum(log_probs[rows_idx, chosen]), dtype=scores.dtype)

    def backward(g: np.ndarray):
        grad = np.exp(log_probs)
        grad[rows_idx, chosen] -= 1.0
        grad[~valid] = 0.0
        return ((grad * g).reshape(logits.shape),)

    return apply_op("softmax_cross_entropy", (logits,), out, backward)


def cross_entropy(p: np.ndarray, target: int) -> float:
    """Cross entropy of a probability vector against a target index.

    Args:
        p: Probability vector.
        target: Index of the correct class.

    Returns:
        ``-log p[target]``.

    Raises:
        DataError: If the target is out of range.
    """
    probs = np.asarray(p, dtype=np.float64).reshape(-1)
    if not 0 <= target < probs.size:
        raise DataError(f"target {target} out of range for {probs.size} classes")
    value = probs[target]
    return math.inf if value <= 0.0 else -math.log(value)
