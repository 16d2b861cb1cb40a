"""
Tree files: one "doc_id<TAB>bracketed_tree" record per line.
File: apps/trees/files.py
"""

import logging

from apps.core.exceptions import DataFormatError, TreeError
from apps.core.utils import read_text_lines
from apps.trees.structures import parse_bracketed, to_bracketed

logger = logging.getLogger(__name__)


def format_tree_line(doc_id, tree):
    return f'{doc_id}\t{to_bracketed(tree)}'


def load_trees(path):
    """Return {doc_id: tree} in file order."""
    trees = {}
    for line_no, line in read_text_lines(path):
        line = line.rstrip('\n').rstrip('\r')
        if not line:
            continue
        doc_id, tab, bracketed = line.partition('\t')
        if not tab or not doc_id:
            raise DataFormatError('Expected "doc_id<TAB>tree".', path, line_no)
        if doc_id in trees:
            raise DataFormatError(f'Duplicate document id {doc_id!r}.', path, line_no)
        try:
            trees[doc_id] = parse_bracketed(bracketed)
        except TreeError as e:
            raise DataFormatError(f'Invalid tree for {doc_id!r}: {e}', path, line_no) from e

    logger.info('Loaded %d trees from %s', len(trees), path)
    return trees


def dump_trees(items, path):
    """Write (doc_id, tree) pairs in the given order."""
    with open(path, 'w', encoding='utf-8') as f:
        for doc_id, tree in items:
            f.write(format_tree_line(doc_id, tree) + '\n')
