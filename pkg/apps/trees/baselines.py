"""
Reference tree shapes to compare induced structures against.
File: apps/trees/baselines.py
"""

import numpy as np

from apps.core.exceptions import TreeError
from apps.trees.models import BaselineKind
from apps.trees.structures import Internal, Leaf, from_merge_trace


def _balanced(low, high):
    """Tree over leaves low..high-1, left part gets ceil(size/2) leaves."""
    size = high - low
    if size == 1:
        return Leaf(low)
    middle = low + (size + 1) // 2
    return Internal(_balanced(low, middle), _balanced(middle, high))


def random_merge_trace(n, rng):
    """Each step picks one of the current adjacent pairs uniformly.

    This is uniform over merge orders, not over tree shapes.
    """
    return [int(rng.integers(0, n - step - 1)) for step in range(n - 1)]


def baseline_tree(kind, n, seed=0, rng=None):
    """
    Build a baseline tree over n leaves.

    Args:
        kind: a BaselineKind value.
        n: leaf count, at least 1.
        seed: seeds a fresh generator for the random kind.
        rng: numpy Generator to draw from instead of `seed`, so a corpus of
            random baselines comes from one stream.
    """
    if n < 1:
        raise TreeError(f'a tree needs at least one leaf, got n={n}')

    if kind == BaselineKind.LEFT:
        return from_merge_trace(n, [0] * (n - 1))
    if kind == BaselineKind.RIGHT:
        return from_merge_trace(n, [n - step - 2 for step in range(n - 1)])
    if kind == BaselineKind.BALANCED:
        return _balanced(0, n)
    if kind == BaselineKind.RANDOM:
        rng = rng if rng is not None else np.random.default_rng(seed)
        return from_merge_trace(n, random_merge_trace(n, rng))
    raise ValueError(f'Unknown baseline kind {kind!r}; choose from {", ".join(BaselineKind.values)}')
