from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from django.conf import settings

from apps.core.commands import ToolkitCommand
from apps.core.exceptions import CheckpointError
from apps.corpus.loaders import load_corpus, load_embeddings
from apps.tree_autoencoder.checkpoint import load_checkpoint
from apps.tree_autoencoder.manifest import read_manifest, verify_input
from apps.tree_autoencoder.models import SelectionMode
from apps.tree_autoencoder.trainer import induce_tree, prepare_corpus
from apps.trees.files import dump_trees


class Command(ToolkitCommand):
    help = 'Induce one tree per document with a trained model (no sampling)'

    def add_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True, help='Checkpoint written by train')
        parser.add_argument('--corpus', required=True, help='EDU corpus, one JSON document per line')
        parser.add_argument('--out', required=True, help='Tree file to write')
        parser.add_argument(
            '--embeddings',
            help='Word vectors; defaults to the file recorded in the run manifest next to the checkpoint',
        )
        parser.add_argument(
            '--selector',
            choices=[SelectionMode.ARGMAX.value, SelectionMode.LEFT.value],
            default=SelectionMode.ARGMAX.value,
            help='argmax: best-scoring pair; left: always merge the first pair',
        )
        parser.add_argument('--workers', type=int, default=1, help='Documents encoded in parallel')

    def _embeddings_path(self, options):
        if options['embeddings']:
            return options['embeddings']
        manifest_path = Path(options['checkpoint']).parent / settings.TRAIN_OUTPUT_FILES['MANIFEST']
        if not manifest_path.exists():
            raise CheckpointError(f'No --embeddings given and no run manifest at {manifest_path}')
        return verify_input(read_manifest(manifest_path), 'embeddings')

    def run(self, **options):
        if options['workers'] < 1:
            self.warning('--workers must be at least 1; using 1')
            options['workers'] = 1

        checkpoint = load_checkpoint(options['checkpoint'])
        table = load_embeddings(self._embeddings_path(options))
        if table.dimension != checkpoint.config.dimension:
            raise CheckpointError(
                f'embeddings have dimension {table.dimension}, the model expects {checkpoint.config.dimension}'
            )
        corpus = prepare_corpus(load_corpus(options['corpus']), table)
        params = checkpoint.params
        mode = SelectionMode(options['selector'])

        # Parameters are read-only here; map() keeps input order
        with ThreadPoolExecutor(max_workers=options['workers']) as pool:
            trees = list(pool.map(lambda document: induce_tree(document.embeddings, params, mode), corpus))

        dump_trees(((document.doc_id, tree) for document, tree in zip(corpus, trees)), options['out'])
        self.success(f'Wrote {len(trees)} trees to {options["out"]}')
