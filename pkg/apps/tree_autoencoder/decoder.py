"""
Top-down inverse Tree-LSTM decoder.
File: apps/tree_autoencoder/decoder.py

The root state is split into left and right child states by two cells with
separate parameters, following the encoder's tree node by node, until every
leaf has a state. Leaf states are projected back to embedding space.
"""

from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import ShapeError
from apps.trees.structures import Internal, Leaf, leaf_count
from apps.tree_autoencoder.encoder import NodeState, check_state

LEFT = 'left'
RIGHT = 'right'


@dataclass
class DecodedDocument:
    reconstructions: list  # one Tensor of length d per leaf, in leaf-index order
    walked_tree: object    # the tree as the decoder actually traversed it


def split(graph, parent, side, params):
    """
    Child state for one side of a parent.

    [f; i; o; g] = W h_parent + b; c = s(f) * c_parent + s(i) * tanh(g);
    h = s(o) * tanh(c).
    """
    hidden = params.hidden
    check_state(parent, hidden, 'split')
    if side == LEFT:
        weight, bias = params.W_L, params.b_L
    elif side == RIGHT:
        weight, bias = params.W_R, params.b_R
    else:
        raise ValueError(f'side must be {LEFT!r} or {RIGHT!r}, got {side!r}')

    z = graph.add(graph.matmul(weight, parent.h), bias)
    f = graph.sigmoid(graph.slice(z, 0, hidden))
    i = graph.sigmoid(graph.slice(z, hidden, 2 * hidden))
    o = graph.sigmoid(graph.slice(z, 2 * hidden, 3 * hidden))
    g = graph.tanh(graph.slice(z, 3 * hidden, 4 * hidden))

    c = graph.add(graph.mul(f, parent.c), graph.mul(i, g))
    return NodeState(h=graph.mul(o, graph.tanh(c)), c=c)


def project(graph, state, params):
    """Reconstructed EDU embedding W_out h + b_out."""
    return graph.add(graph.matmul(params.W_out, state.h), params.b_out)


class _Split:
    """Pre-order marker for an internal node while rebuilding the walked tree."""


def _rebuild(preorder):
    pending = []
    result = None
    for item in preorder:
        if isinstance(item, _Split):
            pending.append([])
            continue
        node = item
        while pending and len(pending[-1]) == 1:
            node = Internal(pending.pop()[0], node)
        if pending:
            pending[-1].append(node)
        else:
            result = node
    return result


def decode_document(graph, root, tree, params):
    """
    Reconstruct every leaf of `tree` from the document state `root`.

    A single-leaf tree is decoded by projecting the root directly.
    """
    check_state(root, params.hidden, 'decode_document')
    n = leaf_count(tree)
    reconstructions = [None] * n
    preorder = []

    stack = [(tree, root)]
    while stack:
        node, state = stack.pop()
        if isinstance(node, Internal):
            preorder.append(_Split())
            left = split(graph, state, LEFT, params)
            right = split(graph, state, RIGHT, params)
            stack.append((node.right, right))
            stack.append((node.left, left))
        else:
            if reconstructions[node.index] is not None:
                raise ShapeError('decode_document', 'one state per leaf', f'leaf {node.index} twice')
            preorder.append(Leaf(node.index))
            reconstructions[node.index] = project(graph, state, params)

    return DecodedDocument(reconstructions=reconstructions, walked_tree=_rebuild(preorder))


def reconstruction_loss(graph, predictions, targets):
    """Mean squared error over all n * d coordinates."""
    try:
        targets = np.asarray(targets, dtype=np.float64)
    except ValueError as e:
        raise ShapeError('reconstruction_loss', 'targets of equal dimension', str(e)) from e
    if not predictions or targets.ndim != 2 or len(predictions) != targets.shape[0]:
        raise ShapeError('reconstruction_loss', f'{len(predictions)} target vectors (at least 1)', targets.shape)
    return graph.mse(graph.stack(*predictions), graph.constant(targets))
