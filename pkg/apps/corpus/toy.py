"""
Bundled synthetic review corpus.
File: apps/corpus/toy.py

Every document talks about two aspects in turn (for example food, then
service). Word vectors share a common offset, plus an aspect direction and
a little noise, so EDU means cluster by aspect. The gold tree splits a
document at the aspect boundary and is balanced inside each segment.
"""

from dataclasses import dataclass

import numpy as np

from apps.corpus.loaders import EduDocument, EmbeddingTable
from apps.trees.baselines import baseline_tree
from apps.trees.models import BaselineKind
from apps.trees.structures import Internal, Leaf

TOY_DIMENSION = 16
TOY_DOCUMENTS = 20
TOY_MIN_EDUS = 3
TOY_MAX_EDUS = 8

ASPECT_WORDS = {
    'food': ('pasta', 'pizza', 'sauce', 'dessert', 'burger', 'fries', 'salad', 'soup'),
    'service': ('waiter', 'waitress', 'staff', 'host', 'friendly', 'rude', 'attentive', 'slow'),
    'price': ('cheap', 'expensive', 'bill', 'price', 'value', 'tip', 'deal', 'overpriced'),
    'ambience': ('music', 'noisy', 'cozy', 'decor', 'lighting', 'patio', 'crowded', 'quiet'),
}
FILLER_WORDS = ('the', 'was', 'and', 'very', 'really', 'a', 'but', 'too')


@dataclass
class ToyCorpus:
    documents: list
    vectors: dict      # word -> np.ndarray of length TOY_DIMENSION
    gold: dict         # doc_id -> tree

    @property
    def table(self):
        return EmbeddingTable.from_dict(self.vectors)


def _segment_tree(offset, size):
    """Balanced tree over leaves offset..offset+size-1."""
    tree = baseline_tree(BaselineKind.BALANCED, size)
    return _shift(tree, offset)


def _shift(tree, offset):
    if isinstance(tree, Leaf):
        return Leaf(tree.index + offset)
    return Internal(_shift(tree.left, offset), _shift(tree.right, offset))


def gold_tree(first_segment, n):
    """Split at the aspect boundary, balanced inside both segments."""
    return Internal(_segment_tree(0, first_segment), _segment_tree(first_segment, n - first_segment))


def _vectors(rng, dimension):
    offset = rng.uniform(1.0, 2.0, size=dimension) * rng.choice((-1.0, 1.0), size=dimension)
    vectors = {}
    for aspect, words in ASPECT_WORDS.items():
        direction = rng.normal(scale=0.2, size=dimension)
        for word in words:
            vectors[word] = offset + direction + rng.normal(scale=0.05, size=dimension)
    for word in FILLER_WORDS:
        vectors[word] = offset + rng.normal(scale=0.05, size=dimension)
    return vectors


def _edu(rng, aspect):
    words = ASPECT_WORDS[aspect]
    tokens = [words[i] for i in rng.integers(0, len(words), size=int(rng.integers(1, 4)))]
    if rng.random() < 0.5:
        tokens.insert(0, FILLER_WORDS[int(rng.integers(0, len(FILLER_WORDS)))])
    return tokens


def make_toy_corpus(seed=0, documents=TOY_DOCUMENTS, dimension=TOY_DIMENSION):
    """Deterministic in seed; documents have 3 to 8 EDUs."""
    rng = np.random.default_rng(seed)
    vectors = _vectors(rng, dimension)
    aspects = list(ASPECT_WORDS)

    corpus, gold = [], {}
    for number in range(1, documents + 1):
        n = int(rng.integers(TOY_MIN_EDUS, TOY_MAX_EDUS + 1))
        first_segment = int(rng.integers(1, n))
        first, second = rng.choice(len(aspects), size=2, replace=False)
        edus = [_edu(rng, aspects[first]) for _ in range(first_segment)]
        edus += [_edu(rng, aspects[second]) for _ in range(n - first_segment)]
        doc_id = f'toy{number:02d}'
        corpus.append(EduDocument(doc_id, edus))
        gold[doc_id] = gold_tree(first_segment, n)

    return ToyCorpus(documents=corpus, vectors=vectors, gold=gold)


def dump_embeddings(vectors, path):
    """GloVe text format; repr keeps every float exact on reload."""
    with open(path, 'w', encoding='utf-8') as f:
        for word, vector in vectors.items():
            f.write(word + ' ' + ' '.join(repr(float(value)) for value in vector) + '\n')
