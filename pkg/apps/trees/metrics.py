"""
Unlabeled span scores and tree shape statistics.
File: apps/trees/metrics.py

Spans are the (first leaf, last leaf) pairs of internal nodes, root included
and single leaves excluded. With one leaf both span sets are empty and the
scores are defined as 1.
"""

from dataclasses import dataclass

from apps.core.exceptions import TreeError
from apps.trees.structures import Internal, height, iter_nodes, leaf_count, spans, to_bracketed


@dataclass(frozen=True)
class SpanScore:
    """Span counts of one document, or pooled over a corpus."""
    matched: int
    predicted: int
    gold: int

    @property
    def precision(self):
        return self.matched / self.predicted if self.predicted else 1.0

    @property
    def recall(self):
        return self.matched / self.gold if self.gold else 1.0

    @property
    def f1(self):
        total = self.predicted + self.gold
        return 2 * self.matched / total if total else 1.0

    def as_tuple(self):
        return (self.precision, self.recall, self.f1)

    def __add__(self, other):
        return SpanScore(self.matched + other.matched, self.predicted + other.predicted, self.gold + other.gold)


def span_score(pred, gold):
    if leaf_count(pred) != leaf_count(gold):
        raise TreeError(f'leaf counts differ: predicted {leaf_count(pred)}, gold {leaf_count(gold)}')
    pred_spans, gold_spans = spans(pred), spans(gold)
    return SpanScore(len(pred_spans & gold_spans), len(pred_spans), len(gold_spans))


def unlabeled_span_f1(pred, gold):
    """(precision, recall, f1) of pred's internal spans against gold's."""
    return span_score(pred, gold).as_tuple()


def micro_average(scores):
    """Pool span counts over documents."""
    return sum(scores, SpanScore(0, 0, 0))


def deviating_spans(pred, gold):
    """Internal spans of pred that gold does not have."""
    return spans(pred) - spans(gold)


def to_bracketed_marked(pred, gold):
    """pred in bracketed form with deviating nodes opening as "(*"."""
    return to_bracketed(pred, marked=deviating_spans(pred, gold))


def branching_counts(tree):
    """(internal nodes, internal nodes with an internal left child, ... right child)."""
    internal = left = right = 0
    for node in iter_nodes(tree):
        if isinstance(node, Internal):
            internal += 1
            left += isinstance(node.left, Internal)
            right += isinstance(node.right, Internal)
    return internal, left, right


def tree_statistics(trees):
    """
    Shape summary over a collection of trees.

    Branching proportions pool the internal nodes of trees with at least
    three leaves (smaller trees have no choice of shape); they are None when
    no such tree exists.
    """
    trees = list(trees)
    leaf_counts = [leaf_count(tree) for tree in trees]
    heights = [height(tree) for tree in trees]

    internal = left = right = 0
    for tree, n in zip(trees, leaf_counts):
        if n >= 3:
            counts = branching_counts(tree)
            internal += counts[0]
            left += counts[1]
            right += counts[2]

    return {
        'trees': len(trees),
        'leaf_counts': leaf_counts,
        'heights': heights,
        'mean_leaves': sum(leaf_counts) / len(trees) if trees else 0.0,
        'mean_height': sum(heights) / len(trees) if trees else 0.0,
        'left_branching': left / internal if internal else None,
        'right_branching': right / internal if internal else None,
    }
