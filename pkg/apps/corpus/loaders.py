"""
Embedding and corpus ingestion.
File: apps/corpus/loaders.py

- load_embeddings: GloVe text format, one "word v1 ... vd" per line
- load_corpus / dump_corpus: one JSON document record per line
- edu_embedding: mean of the in-vocabulary word vectors of an EDU
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import DataFormatError
from apps.core.utils import read_text_lines
from apps.corpus.serializers import CorpusRecordSerializer, first_error

logger = logging.getLogger(__name__)


class EmbeddingTable:
    """
    Read-only word -> vector lookup of a fixed dimension.

    vector() returns None for an absent word, which is never confused with a
    stored all-zero vector.
    """

    def __init__(self, dimension, words, matrix, warnings=()):
        self.dimension = dimension
        self._rows = {word: row for row, word in enumerate(words)}
        self._matrix = np.array(matrix, dtype=np.float64).reshape(len(words), dimension)
        self._matrix.setflags(write=False)
        self.warnings = tuple(warnings)

    @classmethod
    def from_dict(cls, entries):
        words = list(entries)
        if not words:
            raise DataFormatError('Embedding table is empty.')
        dimension = len(entries[words[0]])
        for word in words:
            if len(entries[word]) != dimension:
                raise DataFormatError(f'Vector for {word!r} has {len(entries[word])} components, expected {dimension}.')
        return cls(dimension, words, [entries[word] for word in words])

    def __len__(self):
        return len(self._rows)

    def __contains__(self, word):
        return word in self._rows

    def __iter__(self):
        return iter(self._rows)

    def vector(self, word):
        row = self._rows.get(word)
        if row is None:
            return None
        return self._matrix[row]


@dataclass
class OovStats:
    """Counters filled in by edu_embedding when one is passed in."""
    edus: int = 0
    tokens: int = 0
    oov_tokens: int = 0
    all_oov_edus: int = 0


@dataclass(frozen=True)
class EduDocument:
    """A document as an ordered sequence of EDUs, each a sequence of tokens."""
    doc_id: str
    edus: tuple

    def __post_init__(self):
        if not self.edus:
            raise DataFormatError(f'Document {self.doc_id!r} has no EDUs.')
        for index, edu in enumerate(self.edus):
            if not edu:
                raise DataFormatError(f'Document {self.doc_id!r}: EDU {index} is empty.')
        object.__setattr__(self, 'edus', tuple(tuple(edu) for edu in self.edus))

    def __len__(self):
        return len(self.edus)

    def to_record(self):
        return {'id': self.doc_id, 'edus': [list(edu) for edu in self.edus]}


def load_embeddings(path):
    """
    Parse a GloVe-style text file.

    The first line fixes the dimension. On a repeated word the first vector
    wins and a warning is kept on the table (and logged).
    """
    words, vectors, warnings = [], [], []
    seen = set()
    dimension = None

    for line_no, line in read_text_lines(path):
        items = line.rstrip('\n').split()
        if not items:
            continue
        word, components = items[0], items[1:]
        if dimension is None:
            if not components:
                raise DataFormatError('Embedding line has no vector components.', path, line_no)
            dimension = len(components)
        if len(components) != dimension:
            raise DataFormatError(
                f'Expected {dimension} components, found {len(components)}.', path, line_no
            )
        try:
            vector = [float(value) for value in components]
        except ValueError as e:
            raise DataFormatError(f'Invalid number: {e}', path, line_no) from e

        if word in seen:
            message = f'Duplicate word {word!r} at line {line_no}; keeping the first vector.'
            warnings.append(message)
            logger.warning(message)
            continue
        seen.add(word)
        words.append(word)
        vectors.append(vector)

    if dimension is None:
        raise DataFormatError('Embedding file is empty.', path)

    logger.info('Loaded %d embeddings of dimension %d from %s', len(words), dimension, path)
    return EmbeddingTable(dimension, words, vectors, warnings)


def parse_record(data, path=None, line_no=None):
    serializer = CorpusRecordSerializer(data=data)
    if not serializer.is_valid():
        raise DataFormatError(f'Invalid record: {first_error(serializer.errors)}', path, line_no)
    return EduDocument(serializer.validated_data['id'], serializer.validated_data['edus'])


def load_corpus(path):
    """Read documents in file order. An empty file is a valid, empty corpus."""
    documents = []
    seen_ids = set()

    for line_no, line in read_text_lines(path):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataFormatError(f'Malformed JSON: {e.msg}', path, line_no) from e
        document = parse_record(data, path, line_no)
        if document.doc_id in seen_ids:
            raise DataFormatError(f'Duplicate document id {document.doc_id!r}.', path, line_no)
        seen_ids.add(document.doc_id)
        documents.append(document)

    logger.info('Loaded %d documents from %s', len(documents), path)
    return documents


def dump_corpus(documents, path):
    with open(path, 'w', encoding='utf-8') as f:
        for document in documents:
            f.write(json.dumps(document.to_record(), ensure_ascii=False) + '\n')


def edu_embedding(tokens, table, stats=None):
    """
    Mean of the vectors of the in-vocabulary tokens.

    Out-of-vocabulary tokens are skipped; an EDU with no known token maps to
    the zero vector. Tokens are looked up as written (no lowercasing).
    """
    if not tokens:
        raise DataFormatError('Cannot embed an empty EDU.')

    known = [vector for vector in (table.vector(token) for token in tokens) if vector is not None]
    if stats is not None:
        stats.edus += 1
        stats.tokens += len(tokens)
        stats.oov_tokens += len(tokens) - len(known)

    if not known:
        if stats is not None:
            stats.all_oov_edus += 1
        logger.debug('All tokens out of vocabulary: %s', ' '.join(tokens))
        return np.zeros(table.dimension)
    return np.mean(known, axis=0)


def document_embeddings(document, table, stats=None):
    """Stacked EDU embeddings of a document, shape (n, d)."""
    return np.stack([edu_embedding(edu, table, stats) for edu in document.edus])
