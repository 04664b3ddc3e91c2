"""Tensors, the recording graph and reverse-mode differentiation."""

import contextvars
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from diarlite.errors import NumericError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE_GRAPH: contextvars.ContextVar[Optional["Graph"]] = contextvars.ContextVar(
    "diarlite_active_graph", default=None
)


class Tensor:
    """A dense array that may take part in a recorded computation.

    Leaf tensors with ``requires_grad=True`` are parameters (or inputs under
    gradient check). Tensors produced by ops while a :class:`Graph` is active
    are recorded as graph nodes; outside a graph, ops compute plain values.
    """

    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(
        self,
        data: "np.ndarray | float | Sequence[float]",
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[np.dtype] = None,
    ) -> None:
        """Initialize a tensor.

        Args:
            data: Array-like values.
            requires_grad: Whether gradients should be computed for this leaf.
            name: Optional name, used as the key of returned gradients.
            dtype: Optional dtype to cast to. Defaults to float64.
        """
        array = np.asarray(data, dtype=dtype if dtype is not None else None)
        if array.dtype.kind != "f":
            array = array.astype(np.float64)
        self.data = array
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        """Shape of the underlying array."""
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        """Dtype of the underlying array."""
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        """Return the underlying array (not a copy)."""
        return self.data

    def item(self) -> float:
        """Return the value of a single-element tensor."""
        if self.data.size != 1:
            raise NumericError(
                f"item() needs a single-element tensor, got shape {self.shape}"
            )
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        label = f" name='{self.name}'" if self.name else ""
        return f"<Tensor shape={self.shape} dtype={self.dtype}{label}>"

    # Operator sugar, resolved lazily to avoid an import cycle with ops.
    def __add__(self, other: "Tensor | float") -> "Tensor":
        from diarlite.numeric import ops

        return ops.add(self, _as_tensor(other, self))

    __radd__ = __add__

    def __sub__(self, other: "Tensor | float") -> "Tensor":
        from diarlite.numeric import ops

        return ops.sub(self, _as_tensor(other, self))

    def __mul__(self, other: "Tensor | float") -> "Tensor":
        from diarlite.numeric import ops

        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from diarlite.numeric import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from diarlite.numeric import ops

        return ops.matmul(self, other)

    @property
    def T(self) -> "Tensor":
        from diarlite.numeric import ops

        return ops.transpose(self)


def _as_tensor(value: "Tensor | float", like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.dtype))


@dataclass
class Node:
    """One record of the graph: an op, its input node ids and its output."""

    op: str
    inputs: Tuple[int, ...]
    output: Tensor
    backward_fn: Optional[BackwardFn] = None


class Graph:
    """Topologically ordered record of the ops executed inside its context.

    Nodes are appended in execution order, so every node's inputs precede it.

    Example:
        >>> with Graph() as graph:
        ...     loss = ops.reduce_sum(ops.matmul(w, x))
        >>> grads = backward(graph, loss)
    """

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self._index: Dict[int, int] = {}
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Graph":
        self._token = _ACTIVE_GRAPH.set(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        if self._token is not None:
            _ACTIVE_GRAPH.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def node_id(self, tensor: Tensor) -> Optional[int]:
        """Return the node id of a tensor in this graph, if it is tracked."""
        node = self._index.get(id(tensor))
        if node is not None:
            return node
        if tensor.requires_grad:
            return self._add(Node(op="leaf", inputs=(), output=tensor))
        return None

    def record(
        self,
        op: str,
        inputs: Sequence[Tensor],
        output: np.ndarray,
        backward_fn: BackwardFn,
    ) -> Tensor:
        """Record an op and return its output tensor.

        Args:
            op: Op kind.
            inputs: Input tensors.
            output: Computed output array.
            backward_fn: Maps the output gradient to one gradient per input
                (None where an input needs none).

        Returns:
            The output tensor; tracked if any input is tracked.
        """
        ids = [self.node_id(t) for t in inputs]
        if all(i is None for i in ids):
            return Tensor(output)
        tensor = Tensor(output, requires_grad=True)
        self._add(
            Node(
                op=op,
                inputs=tuple(-1 if i is None else i for i in ids),
                output=tensor,
                backward_fn=backward_fn,
            )
        )
        return tensor

    def _add(self, node: Node) -> int:
        self.nodes.append(node)
        node_id = len(self.nodes) - 1
        self._index[id(node.output)] = node_id
        return node_id


def active_graph() -> Optional[Graph]:
    """Return the graph recording in the current context, if any."""
    return _ACTIVE_GRAPH.get()


class no_grad:
    """Context manager that suspends recording (inference mode)."""

    def __enter__(self) -> "no_grad":
        self._token = _ACTIVE_GRAPH.set(None)
        return self

    def __exit__(self, *exc_info: object) -> None:
        _ACTIVE_GRAPH.reset(self._token)


def apply_op(
    op: str,
    inputs: Sequence[Tensor],
    output: np.ndarray,
    backward_fn: BackwardFn,
) -> Tensor:
    """Wrap an op result, recording it when a graph is active.

    Raises:
        NumericError: If the output holds a non-finite value.
    """
    if not np.all(np.isfinite(output)):
        raise NumericError(f"non-finite value produced by op '{op}'")
    graph = _ACTIVE_GRAPH.get()
    if graph is None:
        return Tensor(output)
    return graph.record(op, inputs, output, backward_fn)


def backward(
    graph: Graph,
    loss: Tensor,
    params: Optional[Iterable[Tensor]] = None,
) -> Dict[str, np.ndarray]:
    """Run reverse-mode differentiation from a scalar loss.

    Args:
        graph: Graph that recorded the computation of ``loss``.
        loss: Scalar tensor recorded in ``graph``.
        params: Optional leaves to report. When given, every listed leaf gets
            an entry, exactly zero if the loss does not depend on it. When
            omitted, every reachable named leaf is reported.

    Returns:
        Mapping from leaf name to gradient array.

    Raises:
        NumericError: If the loss is not scalar or not part of the graph.
    """
    if loss.data.size != 1:
        raise NumericError(f"loss must be scalar, got shape {loss.shape}")
    loss_id = graph._index.get(id(loss))
    if loss_id is None:
        raise NumericError("loss was not recorded in this graph")

    grads: Dict[int, np.ndarray] = {loss_id: np.ones_like(loss.data)}
    for node_id in range(loss_id, -1, -1):
        grad = grads.get(node_id)
        if grad is None:
            continue
        node = graph.nodes[node_id]
        if node.backward_fn is None:
            continue
        input_grads = node.backward_fn(grad)
        for input_id, input_grad in zip(node.inputs, input_grads):
            if input_id < 0 or input_grad is None:
                continue
            if input_id in grads:
                grads[input_id] = grads[input_id] + input_grad
            else:
                grads[input_id] = input_grad

    result: Dict[str, np.ndarray] = {}
    if params is not None:
        for param in params:
            key = param.name if param.name is not None else f"<unnamed:{id(param)}>"
            node_id = graph._index.get(id(param))
            grad = grads.get(node_id) if node_id is not None else None
            result[key] = grad if grad is not None else np.zeros_like(param.data)
        return result

    for node_id, grad in grads.items():
        node = graph.nodes[node_id]
        if node.op == "leaf" and node.output.name is not None:
            result[node.output.name] = grad
    return result
