"""
Bottom-up Tree-LSTM encoder with a discrete structure selector.
File: apps/tree_autoencoder/encoder.py

Each EDU embedding becomes a leaf state. While more than one state remains on
the frontier, every adjacent pair is composed into a candidate parent, the
candidates are scored against the query vector q and one pair is merged. The
last remaining state encodes the whole document.
"""

import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import SelectionError, ShapeError, TreeError
from apps.tree_autoencoder.models import SelectionMode
from apps.trees.structures import from_merge_trace

logger = logging.getLogger(__name__)


@dataclass
class NodeState:
    """Hidden and memory vectors of a (sub)tree, both of length H."""
    h: object
    c: object


@dataclass
class EncodedDocument:
    root: NodeState
    tree: object
    trace: list


def check_state(state, hidden, op):
    for part in (state.h, state.c):
        if part.shape != (hidden,):
            raise ShapeError(op, (hidden,), part.shape)


def leaf_transform(graph, embedding, params):
    """u = W_leaf e + b_leaf; h = tanh(u[:H]), c = u[H:]."""
    hidden = params.hidden
    if embedding.shape != (params.dimension,):
        raise ShapeError('leaf_transform', (params.dimension,), embedding.shape)
    u = graph.add(graph.matmul(params.W_leaf, embedding), params.b_leaf)
    return NodeState(
        h=graph.tanh(graph.slice(u, 0, hidden)),
        c=graph.slice(u, hidden, 2 * hidden),
    )


def compose(graph, left, right, params):
    """Binary Tree-LSTM cell with one forget gate per child."""
    hidden = params.hidden
    check_state(left, hidden, 'compose')
    check_state(right, hidden, 'compose')

    z = graph.add(graph.matmul(params.W_comp, graph.concat(left.h, right.h)), params.b_comp)

    def gate(k):
        return graph.slice(z, k * hidden, (k + 1) * hidden)

    i = graph.sigmoid(gate(0))
    f_left = graph.sigmoid(gate(1))
    f_right = graph.sigmoid(gate(2))
    o = graph.sigmoid(gate(3))
    g = graph.tanh(gate(4))

    c = graph.add(
        graph.add(graph.mul(f_left, left.c), graph.mul(f_right, right.c)),
        graph.mul(i, g),
    )
    return NodeState(h=graph.mul(o, graph.tanh(c)), c=c)


def score_pairs(graph, frontier, params):
    """Compose every adjacent pair; logit_i = q . candidate_i.h."""
    if len(frontier) < 2:
        raise SelectionError(f'scoring needs at least 2 frontier nodes, got {len(frontier)}')
    candidates = [compose(graph, frontier[i], frontier[i + 1], params) for i in range(len(frontier) - 1)]
    logits = graph.matmul(graph.stack(*(candidate.h for candidate in candidates)), params.q)
    return candidates, logits


def st_gumbel_select(graph, logits, temperature, mode, rng=None, noise=None):
    """
    Straight-through Gumbel-Softmax selection.

    Returns (hard, soft): hard is a one-hot numpy vector at the argmax of the
    perturbed logits (lowest index on ties), soft the softmax Tensor of the
    perturbed logits that carries the gradient.

    `noise` replaces the Gumbel draw in sample mode (zero noise reproduces
    argmax mode). Left mode always picks index 0.
    """
    if not np.isfinite(temperature) or temperature <= 0:
        raise SelectionError(f'temperature must be positive, got {temperature}')
    mode = SelectionMode(mode)

    if mode == SelectionMode.SAMPLE:
        if noise is None:
            if rng is None:
                raise SelectionError('sample mode needs a random generator')
            noise = rng.gumbel(size=logits.shape)
        logits = graph.add(logits, graph.constant(noise))
    perturbed = graph.scale(logits, 1.0 / temperature)
    soft = graph.softmax(perturbed)

    index = 0 if mode == SelectionMode.LEFT else int(np.argmax(perturbed.values))
    hard = np.zeros(perturbed.shape)
    hard[index] = 1.0
    return hard, soft


def encode_document(graph, embeddings, params, mode=SelectionMode.ARGMAX, temperature=1.0,
                    rng=None, trace=None, noise=None):
    """
    Encode a document bottom-up.

    Args:
        embeddings: (n, d) array of EDU embeddings.
        mode: SelectionMode. In sample mode the chosen parent is the hard
            one-hot selection applied to all candidates through a
            straight-through op, so q gets a gradient. In the other modes the
            chosen candidate is used directly and the choice is a constant.
        trace: forces the merge choices (the selector still runs).
        noise: per-step Gumbel noise for sample mode, one array of length
            len(frontier) - 1 per merge; replaces the draws from rng.

    Returns:
        EncodedDocument with the root state, the induced tree and its trace.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0:
        raise ShapeError('encode_document', '(n >= 1, d) embeddings', embeddings.shape)
    mode = SelectionMode(mode)
    n = embeddings.shape[0]

    frontier = [leaf_transform(graph, graph.constant(row), params) for row in embeddings]
    choices = []
    while len(frontier) > 1:
        candidates, logits = score_pairs(graph, frontier, params)
        step_noise = None if noise is None else noise[len(choices)]
        hard, soft = st_gumbel_select(graph, logits, temperature, mode, rng, noise=step_noise)
        if trace is not None:
            index = trace[len(choices)]
            if not 0 <= index <= len(frontier) - 2:
                raise TreeError(
                    f'forced choice {index} outside 0..{len(frontier) - 2}',
                    position=f'step {len(choices)}',
                )
        else:
            index = int(np.argmax(hard))

        if mode == SelectionMode.SAMPLE and trace is None:
            selection = graph.straight_through(soft, hard)
            parent = NodeState(
                h=graph.matmul(selection, graph.stack(*(c.h for c in candidates))),
                c=graph.matmul(selection, graph.stack(*(c.c for c in candidates))),
            )
        else:
            parent = candidates[index]

        frontier[index:index + 2] = [parent]
        choices.append(index)

    tree = from_merge_trace(n, choices)
    logger.debug('encoded %d EDUs, trace %s', n, choices)
    return EncodedDocument(root=frontier[0], tree=tree, trace=choices)
