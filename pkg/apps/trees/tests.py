import itertools
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from apps.core.exceptions import DataFormatError, TreeError
from apps.trees.baselines import baseline_tree, random_merge_trace
from apps.trees.files import dump_trees, format_tree_line, load_trees
from apps.trees.metrics import (
    SpanScore,
    deviating_spans,
    micro_average,
    to_bracketed_marked,
    tree_statistics,
    unlabeled_span_f1,
)
from apps.trees.models import BaselineKind
from apps.trees.structures import (
    Internal,
    Leaf,
    from_merge_trace,
    height,
    parse_bracketed,
    spans,
    to_bracketed,
    validate_tree,
)


def all_traces(n):
    return itertools.product(*(range(n - step - 1) for step in range(n - 1)))


def oracle_spans(tree):
    """Spans collected by plain recursion over leaf indices."""
    found = set()

    def visit(node):
        if isinstance(node, Leaf):
            return [node.index]
        indices = visit(node.left) + visit(node.right)
        found.add((min(indices), max(indices)))
        return indices

    visit(tree)
    return found


def oracle_f1(pred, gold):
    p, g = oracle_spans(pred), oracle_spans(gold)
    if not p and not g:
        return 1.0, 1.0, 1.0
    overlap = len(p & g)
    precision, recall = overlap / len(p), overlap / len(g)
    f1 = 2 * overlap / (len(p) + len(g))
    return precision, recall, f1


class MergeTraceTest(SimpleTestCase):
    """Tests for building trees from merge traces"""

    def test_left_then_root(self):
        self.assertEqual(from_merge_trace(3, [0, 0]), Internal(Internal(Leaf(0), Leaf(1)), Leaf(2)))

    def test_right_then_root(self):
        self.assertEqual(from_merge_trace(3, [1, 0]), Internal(Leaf(0), Internal(Leaf(1), Leaf(2))))

    def test_single_leaf(self):
        self.assertEqual(from_merge_trace(1, []), Leaf(0))

    def test_out_of_range_names_step(self):
        with self.assertRaises(TreeError) as ctx:
            from_merge_trace(3, [0, 1])
        self.assertIn('step 1', str(ctx.exception))

    def test_wrong_length(self):
        with self.assertRaises(TreeError):
            from_merge_trace(3, [0])

    def test_every_trace_gives_valid_tree(self):
        for n in range(1, 6):
            for trace in all_traces(n):
                tree = from_merge_trace(n, trace)
                self.assertEqual(validate_tree(tree), n)
                self.assertEqual(len(spans(tree)), n - 1)

    def test_random_traces_up_to_twelve(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            n = int(rng.integers(6, 13))
            tree = from_merge_trace(n, random_merge_trace(n, rng))
            self.assertEqual(validate_tree(tree), n)

    def test_internal_rejects_non_adjacent_children(self):
        with self.assertRaises(TreeError):
            Internal(Leaf(0), Leaf(2))


class SpanTest(SimpleTestCase):
    """Tests for span extraction and shape helpers"""

    def test_spans(self):
        self.assertEqual(spans(parse_bracketed('( ( 0 1 ) 2 )')), {(0, 1), (0, 2)})
        self.assertEqual(spans(parse_bracketed('( 0 ( 1 2 ) )')), {(1, 2), (0, 2)})
        self.assertEqual(spans(Leaf(0)), frozenset())

    def test_height(self):
        self.assertEqual(height(Leaf(0)), 0)
        self.assertEqual(height(baseline_tree(BaselineKind.LEFT, 5)), 4)
        self.assertEqual(height(baseline_tree(BaselineKind.BALANCED, 4)), 2)


class BracketedTest(SimpleTestCase):
    """Tests for the bracketed tree grammar"""

    def test_serialize(self):
        self.assertEqual(to_bracketed(from_merge_trace(3, [0, 0])), '( ( 0 1 ) 2 )')
        self.assertEqual(to_bracketed(Leaf(0)), '0')

    def test_parse(self):
        self.assertEqual(parse_bracketed('( 0 ( 1 2 ) )'), Internal(Leaf(0), Internal(Leaf(1), Leaf(2))))

    def test_missing_leaf(self):
        with self.assertRaises(TreeError) as ctx:
            parse_bracketed('( 0 2 )')
        self.assertIn('leaf 1 missing', str(ctx.exception))

    def test_duplicate_leaf(self):
        with self.assertRaises(TreeError) as ctx:
            parse_bracketed('( 0 ( 1 1 ) )')
        self.assertIn('duplicate leaf 1', str(ctx.exception))

    def test_unbalanced(self):
        for text in ('( 0 1', '( 0 1 ) )', '0 1'):
            with self.subTest(text=text), self.assertRaises(TreeError):
                parse_bracketed(text)

    def test_spacing_is_exact(self):
        for text in ('(0 1)', '( 0  1 )', ' ( 0 1 )', '( 0 01 )'):
            with self.subTest(text=text), self.assertRaises(TreeError):
                parse_bracketed(text)

    def test_round_trip(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(1, 15))
            tree = from_merge_trace(n, random_merge_trace(n, rng))
            self.assertEqual(parse_bracketed(to_bracketed(tree)), tree)


class SpanMetricTest(SimpleTestCase):
    """Tests for unlabeled span precision, recall and F1"""

    def test_identical_trees(self):
        tree = parse_bracketed('( ( 0 1 ) ( 2 3 ) )')
        self.assertEqual(unlabeled_span_f1(tree, tree), (1.0, 1.0, 1.0))

    def test_left_branching_against_balanced(self):
        pred = parse_bracketed('( ( ( 0 1 ) 2 ) 3 )')
        gold = parse_bracketed('( ( 0 1 ) ( 2 3 ) )')
        self.assertEqual(unlabeled_span_f1(pred, gold), (2 / 3, 2 / 3, 2 / 3))

    def test_degenerate_sizes(self):
        self.assertEqual(unlabeled_span_f1(Leaf(0), Leaf(0)), (1.0, 1.0, 1.0))
        two = from_merge_trace(2, [0])
        self.assertEqual(unlabeled_span_f1(two, two), (1.0, 1.0, 1.0))

    def test_leaf_count_mismatch(self):
        with self.assertRaises(TreeError):
            unlabeled_span_f1(from_merge_trace(2, [0]), from_merge_trace(3, [0, 0]))

    def test_swapping_arguments_swaps_precision_and_recall(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1, 11))
            a = from_merge_trace(n, random_merge_trace(n, rng))
            b = from_merge_trace(n, random_merge_trace(n, rng))
            p, r, f = unlabeled_span_f1(a, b)
            self.assertEqual(unlabeled_span_f1(b, a), (r, p, f))

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2024)
        for _ in range(500):
            n = int(rng.integers(1, 11))
            pred = from_merge_trace(n, random_merge_trace(n, rng))
            gold = from_merge_trace(n, random_merge_trace(n, rng))
            self.assertEqual(unlabeled_span_f1(pred, gold), oracle_f1(pred, gold))
            self.assertEqual(unlabeled_span_f1(pred, pred), (1.0, 1.0, 1.0))

    def test_micro_average_pools_counts(self):
        total = micro_average([SpanScore(2, 3, 3), SpanScore(1, 1, 1)])
        self.assertEqual(total, SpanScore(3, 4, 4))
        self.assertEqual(total.f1, 0.75)

    def test_deviations_marked(self):
        pred = parse_bracketed('( ( ( 0 1 ) 2 ) 3 )')
        gold = parse_bracketed('( ( 0 1 ) ( 2 3 ) )')
        self.assertEqual(deviating_spans(pred, gold), {(0, 2)})
        self.assertEqual(to_bracketed_marked(pred, gold), '( (* ( 0 1 ) 2 ) 3 )')


class BaselineTest(SimpleTestCase):
    """Tests for the baseline tree shapes"""

    def test_shapes(self):
        self.assertEqual(spans(baseline_tree(BaselineKind.LEFT, 4)), {(0, 1), (0, 2), (0, 3)})
        self.assertEqual(spans(baseline_tree(BaselineKind.RIGHT, 4)), {(2, 3), (1, 3), (0, 3)})
        self.assertEqual(spans(baseline_tree(BaselineKind.BALANCED, 4)), {(0, 1), (2, 3), (0, 3)})

    def test_balanced_gives_left_half_the_extra_leaf(self):
        self.assertEqual(spans(baseline_tree(BaselineKind.BALANCED, 3)), {(0, 1), (0, 2)})

    def test_random_is_seeded(self):
        first = baseline_tree(BaselineKind.RANDOM, 9, seed=4)
        self.assertEqual(first, baseline_tree(BaselineKind.RANDOM, 9, seed=4))
        self.assertEqual(validate_tree(first), 9)

    def test_empty_rejected(self):
        with self.assertRaises(TreeError):
            baseline_tree(BaselineKind.LEFT, 0)


class StatisticsTest(SimpleTestCase):
    """Tests for tree shape statistics"""

    def test_left_branching_proportion(self):
        stats = tree_statistics([baseline_tree(BaselineKind.LEFT, 4), from_merge_trace(2, [0])])
        self.assertEqual(stats['leaf_counts'], [4, 2])
        self.assertEqual(stats['heights'], [3, 1])
        # trees under three leaves are left out: 2 of 3 internal nodes have an internal left child
        self.assertEqual(stats['left_branching'], 2 / 3)
        self.assertEqual(stats['right_branching'], 0.0)

    def test_no_eligible_trees(self):
        stats = tree_statistics([Leaf(0), from_merge_trace(2, [0])])
        self.assertIsNone(stats['left_branching'])


class TreeFileTest(SimpleTestCase):
    """Tests for reading and writing tree files"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_keeps_order(self):
        items = [('b', from_merge_trace(3, [1, 0])), ('a', Leaf(0))]
        dump_trees(items, self.dir / 'trees.tsv')
        self.assertEqual(list(load_trees(self.dir / 'trees.tsv').items()), items)

    def test_single_leaf_line(self):
        self.assertEqual(format_tree_line('d1', Leaf(0)), 'd1\t0')

    def test_bad_tree_reports_line(self):
        (self.dir / 'bad.tsv').write_text('d1\t0\nd2\t( 0 2 )\n')
        with self.assertRaises(DataFormatError) as ctx:
            load_trees(self.dir / 'bad.tsv')
        self.assertEqual(ctx.exception.line, 2)

    def test_duplicate_id(self):
        (self.dir / 'dup.tsv').write_text('d1\t0\nd1\t0\n')
        with self.assertRaises(DataFormatError):
            load_trees(self.dir / 'dup.tsv')


class EvalCommandTest(SimpleTestCase):
    """Tests for the eval and stats commands"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.gold = self.dir / 'gold.tsv'
        self.gold.write_text('d1\t( ( 0 1 ) ( 2 3 ) )\n')

    def tearDown(self):
        self.tmp.cleanup()

    def run_command(self, *args):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO())
        return out.getvalue().splitlines()

    def test_identical_files_score_one(self):
        lines = self.run_command('eval', '--pred', str(self.gold), '--gold', str(self.gold))
        self.assertEqual(lines[-1].split('\t')[2:], ['1.000000'] * 3)

    def test_left_baseline(self):
        lines = self.run_command('eval', '--gold', str(self.gold), '--baseline', 'left')
        self.assertEqual(lines[0], 'doc_id\tleaves\tprecision\trecall\tf1')
        self.assertEqual(lines[1], 'd1\t4\t0.666667\t0.666667\t0.666667')
        self.assertEqual(lines[-1], 'micro\t4\t0.666667\t0.666667\t0.666667')

    def test_show_deviations(self):
        lines = self.run_command('eval', '--gold', str(self.gold), '--baseline', 'left', '--show-deviations')
        self.assertTrue(lines[1].endswith('( (* ( 0 1 ) 2 ) 3 )'))

    def test_missing_ids_listed(self):
        pred = self.dir / 'pred.tsv'
        pred.write_text('d2\t( 0 1 )\n')
        with self.assertRaises(CommandError) as ctx:
            self.run_command('eval', '--pred', str(pred), '--gold', str(self.gold))
        self.assertIn('d1', str(ctx.exception))
        self.assertIn('d2', str(ctx.exception))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_pred_or_baseline_required(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command('eval', '--gold', str(self.gold))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_stats(self):
        lines = self.run_command('stats', '--trees', str(self.gold))
        self.assertIn('d1\t4\t2', lines)
        self.assertIn('left_branching\t0.333333', lines)
        self.assertIn('mean_height\t2.000000', lines)
