"""
Dense tensors with reverse-mode automatic differentiation.
File: apps/autodiff/tensor.py

A ComputeGraph is an append-only list of operation records. Every operation
checks its input shapes (there is no broadcasting), computes its forward value
with numpy in double precision and records its inputs. backward() walks the
records in reverse insertion order and accumulates gradients into the leaf
tensors that require them.

Graphs are cheap and meant to be thrown away: the tree auto-encoder builds a
new one per document because tree shape changes from document to document.
Parameters are plain leaf tensors that outlive any single graph.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from apps.core.exceptions import GraphError, ShapeError

logger = logging.getLogger(__name__)

DTYPE = np.float64


class Tensor:
    """
    Dense real array with an optional gradient.

    values is a float64 numpy array of at least one dimension with positive
    extents. Scalars are represented with shape (1,).
    """

    __slots__ = ('values', 'requires_grad', 'grad', 'name')

    def __init__(self, values, requires_grad=False, name=None):
        values = np.array(values, dtype=DTYPE)
        if values.ndim == 0:
            values = values.reshape(1)
        if any(extent < 1 for extent in values.shape):
            raise ShapeError('tensor', 'positive extents', values.shape)
        self.values = values
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    @classmethod
    def _wrap(cls, array, requires_grad):
        """Wrap an op result without copying it."""
        tensor = cls.__new__(cls)
        tensor.values = array
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor.name = None
        return tensor

    @classmethod
    def zeros(cls, shape, requires_grad=False, name=None):
        return cls(np.zeros(shape, dtype=DTYPE), requires_grad=requires_grad, name=name)

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def item(self):
        if self.values.size != 1:
            raise ShapeError('item', 'a single value', self.shape)
        return float(self.values.reshape(-1)[0])

    def zero_grad(self):
        self.grad = np.zeros_like(self.values)

    def __repr__(self):
        label = f' {self.name!r}' if self.name else ''
        return f'Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})'


# =============================================================================
# Operation registry
# Each op has a forward (numpy arrays in, array out) and a backward
# (upstream gradient, output, inputs -> one gradient per input, or None).
# =============================================================================

@dataclass(frozen=True)
class Op:
    forward: object
    backward: object
    arity: object = None  # int, or None for n-ary


def _require_same_shape(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)


def _matmul_forward(a, b):
    if a.ndim == 2 and b.ndim in (1, 2):
        if a.shape[1] != b.shape[0]:
            raise ShapeError('matmul', f'inner dimension {a.shape[1]}', b.shape)
    elif a.ndim == 1 and b.ndim == 2:
        if a.shape[0] != b.shape[0]:
            raise ShapeError('matmul', f'inner dimension {a.shape[0]}', b.shape)
    else:
        raise ShapeError('matmul', 'matrix-matrix, matrix-vector or vector-matrix', (a.shape, b.shape))
    return a @ b


def _matmul_backward(g, out, a, b):
    if a.ndim == 2 and b.ndim == 2:
        return g @ b.T, a.T @ g
    if a.ndim == 2:
        return np.outer(g, b), a.T @ g
    return b @ g, np.outer(a, g)


def _add_forward(a, b):
    _require_same_shape('add', a, b)
    return a + b


def _multiply_forward(a, b):
    _require_same_shape('elementwise_multiply', a, b)
    return a * b


def _concat_forward(*xs):
    lead = xs[0].shape[:-1]
    for x in xs[1:]:
        if x.ndim != xs[0].ndim or x.shape[:-1] != lead:
            raise ShapeError('concat', f'leading shape {lead}', x.shape)
    return np.concatenate(xs, axis=-1)


def _concat_backward(g, out, *xs):
    bounds = np.cumsum([x.shape[-1] for x in xs])[:-1]
    return tuple(np.split(g, bounds, axis=-1))


def _slice_forward(x, start, stop):
    extent = x.shape[-1]
    if not (0 <= start < stop <= extent):
        raise ShapeError('slice', f'0 <= start < stop <= {extent}', (start, stop))
    return x[..., start:stop].copy()


def _slice_backward(g, out, x, start, stop):
    grad = np.zeros_like(x)
    grad[..., start:stop] = g
    return (grad,)


def _sigmoid_forward(x):
    # tanh form stays finite for large |x| and gives exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax_forward(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def _softmax_backward(g, out, x):
    return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)


def _mse_forward(x, t):
    _require_same_shape('mse', x, t)
    diff = x - t
    return np.array([np.mean(diff * diff)])


def _mse_backward(g, out, x, t):
    grad = g[0] * 2.0 * (x - t) / x.size
    return grad, -grad


def _stack_forward(*xs):
    for x in xs[1:]:
        _require_same_shape('stack', xs[0], x)
    return np.stack(xs, axis=0)


def _straight_through_forward(soft, hard):
    _require_same_shape('straight_through', soft, hard)
    return np.array(hard, dtype=DTYPE)


OPS = {
    'matmul': Op(_matmul_forward, _matmul_backward, 2),
    'add': Op(_add_forward, lambda g, out, a, b: (g, g), 2),
    'elementwise_multiply': Op(_multiply_forward, lambda g, out, a, b: (g * b, g * a), 2),
    'concat': Op(_concat_forward, _concat_backward),
    'slice': Op(_slice_forward, _slice_backward, 1),
    'sigmoid': Op(_sigmoid_forward, lambda g, out, x: (g * out * (1.0 - out),), 1),
    'tanh': Op(np.tanh, lambda g, out, x: (g * (1.0 - out * out),), 1),
    'softmax_lastdim': Op(_softmax_forward, _softmax_backward, 1),
    'scale': Op(lambda x, factor: x * factor, lambda g, out, x, factor: (g * factor,), 1),
    'sum': Op(lambda x: np.array([x.sum()]), lambda g, out, x: (np.full(x.shape, g[0]),), 1),
    'mse': Op(_mse_forward, _mse_backward, 2),
    'stack': Op(_stack_forward, lambda g, out, *xs: tuple(g[i] for i in range(len(xs)))),
    # forward value is `hard` exactly, the gradient goes to `soft` untouched
    'straight_through': Op(_straight_through_forward, lambda g, out, soft, hard: (g,), 1),
}


@dataclass
class Node:
    op: str
    inputs: tuple
    output: Tensor
    attrs: dict = field(default_factory=dict)


class ComputeGraph:
    """
    Append-only record of the operations that produced a loss.

    Inputs always precede the nodes that consume them, so the insertion order
    is a topological order and backward() simply walks it in reverse.
    """

    def __init__(self):
        self.nodes = []
        self._index = {}

    def __len__(self):
        return len(self.nodes)

    def _node_id(self, tensor):
        if not isinstance(tensor, Tensor):
            raise GraphError(f'expected a Tensor, got {type(tensor).__name__}')
        node_id = self._index.get(id(tensor))
        if node_id is None or self.nodes[node_id].output is not tensor:
            node_id = len(self.nodes)
            self.nodes.append(Node('leaf', (), tensor))
            self._index[id(tensor)] = node_id
        return node_id

    def constant(self, values):
        """Leaf tensor that never receives a gradient."""
        tensor = Tensor(values)
        self._node_id(tensor)
        return tensor

    def apply(self, op_kind, *inputs, **attrs):
        op = OPS.get(op_kind)
        if op is None:
            raise GraphError(f'unknown op {op_kind!r}')
        if op.arity is not None and len(inputs) != op.arity:
            raise GraphError(f'{op_kind} takes {op.arity} tensor input(s), got {len(inputs)}')
        if not inputs:
            raise GraphError(f'{op_kind} needs at least one input')

        input_ids = tuple(self._node_id(tensor) for tensor in inputs)
        result = op.forward(*(tensor.values for tensor in inputs), **attrs)
        output = Tensor._wrap(result, any(tensor.requires_grad for tensor in inputs))
        self._index[id(output)] = len(self.nodes)
        self.nodes.append(Node(op_kind, input_ids, output, attrs))
        return output

    # Convenience wrappers, one per op kind

    def matmul(self, a, b):
        return self.apply('matmul', a, b)

    def add(self, a, b):
        return self.apply('add', a, b)

    def mul(self, a, b):
        return self.apply('elementwise_multiply', a, b)

    def concat(self, *tensors):
        return self.apply('concat', *tensors)

    def slice(self, x, start, stop):
        return self.apply('slice', x, start=start, stop=stop)

    def sigmoid(self, x):
        return self.apply('sigmoid', x)

    def tanh(self, x):
        return self.apply('tanh', x)

    def softmax(self, x):
        return self.apply('softmax_lastdim', x)

    def scale(self, x, factor):
        return self.apply('scale', x, factor=float(factor))

    def sum(self, x):
        return self.apply('sum', x)

    def mse(self, x, target):
        return self.apply('mse', x, target)

    def stack(self, *tensors):
        return self.apply('stack', *tensors)

    def straight_through(self, soft, hard):
        return self.apply('straight_through', soft, hard=np.asarray(hard, dtype=DTYPE))

    def backward(self, loss):
        """
        Accumulate d(loss)/d(leaf) into every registered leaf with requires_grad.

        Leaves the loss does not depend on receive a zero gradient. Calling
        backward twice without resetting adds the gradients up.
        """
        if not isinstance(loss, Tensor) or loss.size != 1:
            shape = loss.shape if isinstance(loss, Tensor) else type(loss).__name__
            raise GraphError(f'backward needs a scalar loss, got shape {shape}')
        loss_id = self._index.get(id(loss))
        if loss_id is None or self.nodes[loss_id].output is not loss:
            raise GraphError('loss was not produced by this graph')

        adjoints = [None] * len(self.nodes)
        adjoints[loss_id] = np.ones_like(loss.values)

        for node_id in range(len(self.nodes) - 1, -1, -1):
            upstream = adjoints[node_id]
            node = self.nodes[node_id]
            if upstream is None or node.op == 'leaf':
                continue
            inputs = [self.nodes[i].output.values for i in node.inputs]
            grads = OPS[node.op].backward(upstream, node.output.values, *inputs, **node.attrs)
            for input_id, grad in zip(node.inputs, grads):
                if grad is None or not self.nodes[input_id].output.requires_grad:
                    continue
                current = adjoints[input_id]
                adjoints[input_id] = grad if current is None else current + grad

        for node_id, node in enumerate(self.nodes):
            if node.op != 'leaf' or not node.output.requires_grad:
                continue
            leaf = node.output
            grad = adjoints[node_id]
            if grad is None:
                grad = np.zeros_like(leaf.values)
            leaf.grad = grad.copy() if leaf.grad is None else leaf.grad + grad

        logger.debug('backward over %d nodes', len(self.nodes))


def apply(op_kind, *inputs, graph=None, **attrs):
    """Run a single op, on a fresh graph unless one is given."""
    graph = graph if graph is not None else ComputeGraph()
    return graph.apply(op_kind, *inputs, **attrs)
