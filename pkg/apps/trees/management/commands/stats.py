from apps.core.commands import ToolkitCommand
from apps.trees.files import load_trees
from apps.trees.metrics import tree_statistics


def format_proportion(value):
    return 'n/a' if value is None else f'{value:.6f}'


class Command(ToolkitCommand):
    help = 'Leaf counts, heights and branching proportions of a tree file'

    def add_arguments(self, parser):
        parser.add_argument('--trees', required=True, help='Tree file')

    def run(self, **options):
        trees = load_trees(options['trees'])
        stats = tree_statistics(trees.values())

        self.stdout.write('doc_id\tleaves\theight')
        for doc_id, leaves, height in zip(trees, stats['leaf_counts'], stats['heights']):
            self.stdout.write(f'{doc_id}\t{leaves}\t{height}')

        self.stdout.write(f'trees\t{stats["trees"]}')
        self.stdout.write(f'mean_leaves\t{stats["mean_leaves"]:.6f}')
        self.stdout.write(f'mean_height\t{stats["mean_height"]:.6f}')
        self.stdout.write(f'left_branching\t{format_proportion(stats["left_branching"])}')
        self.stdout.write(f'right_branching\t{format_proportion(stats["right_branching"])}')
