from apps.core.commands import ToolkitCommand
from apps.core.utils import ensure_directory
from apps.corpus.loaders import dump_corpus
from apps.corpus.toy import dump_embeddings, make_toy_corpus
from apps.trees.files import dump_trees


class Command(ToolkitCommand):
    help = 'Write the bundled synthetic corpus: corpus.jsonl, embeddings.txt and gold.tsv'

    def add_arguments(self, parser):
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--seed', type=int, default=0, help='Generator seed')

    def run(self, **options):
        out = ensure_directory(options['out'])
        toy = make_toy_corpus(seed=options['seed'])

        dump_corpus(toy.documents, out / 'corpus.jsonl')
        dump_embeddings(toy.vectors, out / 'embeddings.txt')
        dump_trees(toy.gold.items(), out / 'gold.tsv')
        self.success(f'Wrote {len(toy.documents)} documents and {len(toy.vectors)} word vectors to {out}')
