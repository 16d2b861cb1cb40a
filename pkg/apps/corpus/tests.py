import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.test import SimpleTestCase

from apps.core.exceptions import DataFormatError
from apps.corpus.loaders import (
    EduDocument,
    EmbeddingTable,
    OovStats,
    document_embeddings,
    dump_corpus,
    edu_embedding,
    load_corpus,
    load_embeddings,
)
from apps.corpus.toy import TOY_DIMENSION, TOY_MAX_EDUS, TOY_MIN_EDUS, make_toy_corpus
from apps.trees.files import load_trees
from apps.trees.structures import leaf_count, spans


class FileTestCase(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text, encoding='utf-8')
        return path


class EmbeddingLoaderTest(FileTestCase):
    """Tests for the GloVe text loader"""

    def test_parse(self):
        table = load_embeddings(self.write('e.txt', 'a 1 0\nb 0 1\n'))
        self.assertEqual(table.dimension, 2)
        self.assertEqual(len(table), 2)
        np.testing.assert_array_equal(table.vector('b'), [0.0, 1.0])

    def test_wrong_arity_reports_line(self):
        with self.assertRaises(DataFormatError) as ctx:
            load_embeddings(self.write('e.txt', 'a 1 0\nb 0\n'))
        self.assertEqual(ctx.exception.line, 2)

    def test_first_occurrence_wins(self):
        table = load_embeddings(self.write('e.txt', 'a 1 0\na 9 9\n'))
        np.testing.assert_array_equal(table.vector('a'), [1.0, 0.0])
        self.assertEqual(len(table.warnings), 1)

    def test_empty_file_rejected(self):
        with self.assertRaises(DataFormatError):
            load_embeddings(self.write('e.txt', ''))

    def test_invalid_utf8_reports_line(self):
        path = self.dir / 'e.txt'
        path.write_bytes(b'a 1 0\n\xff 0 1\n')
        with self.assertRaises(DataFormatError) as ctx:
            load_embeddings(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_absent_word_differs_from_zero_vector(self):
        table = EmbeddingTable.from_dict({'zero': [0.0, 0.0]})
        self.assertIsNone(table.vector('other'))
        np.testing.assert_array_equal(table.vector('zero'), [0.0, 0.0])


class CorpusLoaderTest(FileTestCase):
    """Tests for the line-delimited corpus format"""

    def test_parse(self):
        path = self.write('c.jsonl', '{"id": "d1", "edus": [["good", "food"], ["bad", "service"]]}\n')
        documents = load_corpus(path)
        self.assertEqual(len(documents), 1)
        self.assertEqual(documents[0].edus, (('good', 'food'), ('bad', 'service')))

    def test_empty_edu_list_rejected(self):
        with self.assertRaises(DataFormatError) as ctx:
            load_corpus(self.write('c.jsonl', '{"id": "d1", "edus": []}\n'))
        self.assertEqual(ctx.exception.line, 1)

    def test_empty_edu_rejected(self):
        with self.assertRaises(DataFormatError):
            load_corpus(self.write('c.jsonl', '{"id": "d1", "edus": [["a"], []]}\n'))

    def test_malformed_record_reports_line(self):
        path = self.write('c.jsonl', '{"id": "d1", "edus": [["a"]]}\n{"id": "d2", "edus": [["a"]\n')
        with self.assertRaises(DataFormatError) as ctx:
            load_corpus(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_duplicate_id_rejected(self):
        path = self.write('c.jsonl', '{"id": "d1", "edus": [["a"]]}\n{"id": "d1", "edus": [["b"]]}\n')
        with self.assertRaises(DataFormatError):
            load_corpus(path)

    def test_invalid_utf8_reports_line(self):
        path = self.dir / 'c.jsonl'
        path.write_bytes(b'{"id": "d1", "edus": [["ok"]]}\n\xff\n')
        with self.assertRaises(DataFormatError) as ctx:
            load_corpus(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_non_string_id_and_tokens_rejected(self):
        records = [
            '{"id": 7, "edus": [["a"]]}',
            '{"id": "d1", "edus": [[1, 2.5]]}',
            '{"id": "d1", "edus": [["a", true]]}',
        ]
        for record in records:
            with self.subTest(record=record), self.assertRaises(DataFormatError):
                load_corpus(self.write('c.jsonl', record + '\n'))

    def test_empty_file_is_empty_corpus(self):
        self.assertEqual(load_corpus(self.write('c.jsonl', '')), [])

    def test_round_trip(self):
        documents = [EduDocument('d1', [['Good', 'food'], ['bad']]), EduDocument('d2', [['x']])]
        dump_corpus(documents, self.dir / 'c.jsonl')
        self.assertEqual(load_corpus(self.dir / 'c.jsonl'), documents)


class EduEmbeddingTest(SimpleTestCase):
    """Tests for averaging word vectors into EDU vectors"""

    def setUp(self):
        self.table = EmbeddingTable.from_dict({'a': [1.0, 0.0], 'b': [0.0, 1.0], 'c': [4.0, -2.0]})

    def test_mean_of_one(self):
        np.testing.assert_array_equal(edu_embedding(['a'], self.table), [1.0, 0.0])

    def test_mean_of_two(self):
        np.testing.assert_array_equal(edu_embedding(['a', 'b'], self.table), [0.5, 0.5])

    def test_all_oov_is_zero_and_counted(self):
        stats = OovStats()
        np.testing.assert_array_equal(edu_embedding(['zzz'], self.table, stats), [0.0, 0.0])
        self.assertEqual(stats.all_oov_edus, 1)
        self.assertEqual(stats.oov_tokens, 1)

    def test_oov_tokens_skipped(self):
        np.testing.assert_array_equal(edu_embedding(['a', 'zzz'], self.table), [1.0, 0.0])

    def test_case_is_kept(self):
        np.testing.assert_array_equal(edu_embedding(['A'], self.table), [0.0, 0.0])

    def test_empty_rejected(self):
        with self.assertRaises(DataFormatError):
            edu_embedding([], self.table)

    def test_permutation_invariant_and_bounded(self):
        tokens = ['a', 'c', 'b', 'c']
        forward = edu_embedding(tokens, self.table)
        np.testing.assert_allclose(edu_embedding(tokens[::-1], self.table), forward, rtol=0, atol=1e-15)
        self.assertTrue(np.all(forward >= [0.0, -2.0]) and np.all(forward <= [4.0, 1.0]))

    def test_document_matrix(self):
        matrix = document_embeddings(EduDocument('d', [['a'], ['b'], ['a', 'b']]), self.table)
        self.assertEqual(matrix.shape, (3, 2))


class ToyCorpusTest(FileTestCase):
    """Tests for the bundled synthetic corpus"""

    def test_shape(self):
        toy = make_toy_corpus()
        self.assertEqual(len(toy.documents), 20)
        self.assertEqual(toy.table.dimension, TOY_DIMENSION)
        for document in toy.documents:
            self.assertTrue(TOY_MIN_EDUS <= len(document) <= TOY_MAX_EDUS)
            gold = toy.gold[document.doc_id]
            self.assertEqual(leaf_count(gold), len(document))
            self.assertEqual(len(spans(gold)), len(document) - 1)

    def test_every_token_in_vocabulary(self):
        toy = make_toy_corpus(seed=3)
        table = toy.table
        for document in toy.documents:
            for edu in document.edus:
                self.assertTrue(all(token in table for token in edu))

    def test_deterministic(self):
        self.assertEqual(make_toy_corpus(seed=1).documents, make_toy_corpus(seed=1).documents)

    def test_command_writes_loadable_files(self):
        call_command('make_toy_corpus', '--out', str(self.dir / 'toy'), stdout=StringIO())
        toy = make_toy_corpus()
        documents = load_corpus(self.dir / 'toy' / 'corpus.jsonl')
        table = load_embeddings(self.dir / 'toy' / 'embeddings.txt')
        self.assertEqual(documents, toy.documents)
        self.assertEqual(load_trees(self.dir / 'toy' / 'gold.tsv'), toy.gold)
        for word, vector in toy.vectors.items():
            self.assertEqual(table.vector(word).tolist(), vector.tolist())
