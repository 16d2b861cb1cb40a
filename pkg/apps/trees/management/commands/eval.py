import numpy as np

from apps.core.commands import ToolkitCommand
from apps.core.exceptions import DataFormatError, TreeError
from apps.trees.baselines import baseline_tree
from apps.trees.files import load_trees
from apps.trees.metrics import micro_average, span_score, to_bracketed_marked
from apps.trees.models import BaselineKind
from apps.trees.structures import leaf_count


def format_score(score):
    return '\t'.join(f'{value:.6f}' for value in score.as_tuple())


class Command(ToolkitCommand):
    help = 'Unlabeled span precision, recall and F1 of predicted (or baseline) trees against gold trees'

    def add_arguments(self, parser):
        parser.add_argument('--pred', help='Predicted tree file (any tree file, e.g. another run)')
        parser.add_argument('--gold', required=True, help='Gold tree file')
        parser.add_argument('--baseline', choices=BaselineKind.values,
                            help='Score a generated baseline instead of --pred')
        parser.add_argument('--seed', type=int, default=0, help='Seed for the random baseline')
        parser.add_argument('--show-deviations', action='store_true',
                            help='Print each predicted tree with deviating nodes opened as "(*"')

    def _predictions(self, gold, options):
        if options['baseline']:
            kind = BaselineKind(options['baseline'])
            rng = np.random.default_rng(options['seed'])
            return {doc_id: baseline_tree(kind, leaf_count(tree), rng=rng) for doc_id, tree in gold.items()}

        pred = load_trees(options['pred'])
        missing_pred = [doc_id for doc_id in gold if doc_id not in pred]
        missing_gold = [doc_id for doc_id in pred if doc_id not in gold]
        if missing_pred or missing_gold:
            problems = []
            if missing_pred:
                problems.append(f'missing from {options["pred"]}: {", ".join(missing_pred)}')
            if missing_gold:
                problems.append(f'missing from {options["gold"]}: {", ".join(missing_gold)}')
            raise DataFormatError('Document ids do not match; ' + '; '.join(problems))
        return pred

    def run(self, **options):
        if not options['pred'] and not options['baseline']:
            raise self.usage_error('Give --pred or --baseline.')

        gold = load_trees(options['gold'])
        pred = self._predictions(gold, options)

        header = ['doc_id', 'leaves', 'precision', 'recall', 'f1']
        if options['show_deviations']:
            header.append('marked')
        self.stdout.write('\t'.join(header))

        scores = []
        for doc_id, gold_tree in gold.items():
            try:
                score = span_score(pred[doc_id], gold_tree)
            except TreeError as e:
                raise TreeError(f'document {doc_id!r}: {e}') from e
            scores.append(score)
            row = f'{doc_id}\t{leaf_count(gold_tree)}\t{format_score(score)}'
            if options['show_deviations']:
                row += '\t' + to_bracketed_marked(pred[doc_id], gold_tree)
            self.stdout.write(row)

        total = micro_average(scores)
        self.stdout.write(f'micro\t{sum(leaf_count(tree) for tree in gold.values())}\t{format_score(total)}')
