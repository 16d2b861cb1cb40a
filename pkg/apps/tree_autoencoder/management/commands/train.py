from django.conf import settings
from django.utils import timezone

from apps.core.commands import ToolkitCommand
from apps.core.utils import ensure_directory
from apps.corpus.loaders import OovStats, load_corpus, load_embeddings
from apps.tree_autoencoder.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from apps.tree_autoencoder.manifest import build_manifest, complete_manifest, write_manifest
from apps.tree_autoencoder.reports import emit_loss_plot_data
from apps.tree_autoencoder.trainer import TrainConfig, prepare_corpus, train


class Command(ToolkitCommand):
    help = 'Train a tree auto-encoder; writes checkpoint, loss history and run manifest into --out'

    def add_arguments(self, parser):
        parser.add_argument('--corpus', required=True, help='EDU corpus, one JSON document per line')
        parser.add_argument('--embeddings', required=True, help='Word vectors in GloVe text format')
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--epochs', type=int, help='Total number of epochs')
        parser.add_argument('--hidden', type=int, help='Hidden size H')
        parser.add_argument('--seed', type=int, help='Seed of the single random stream')
        parser.add_argument('--phase-length', type=int, help='Epochs per training phase')
        parser.add_argument('--lr', type=float, help='SGD learning rate')
        parser.add_argument('--temp', type=float, help='Start temperature')
        parser.add_argument('--temp-decay', type=float, help='Per-epoch temperature factor')
        parser.add_argument('--temp-min', type=float, help='Temperature floor')
        parser.add_argument('--resume', help='Checkpoint to continue training from')

    def run(self, **options):
        table = load_embeddings(options['embeddings'])
        documents = load_corpus(options['corpus'])
        stats = OovStats()
        corpus = prepare_corpus(documents, table, stats)
        if stats.all_oov_edus:
            self.warning(f'{stats.all_oov_edus} EDUs have no known word and embed as zero vectors')

        config = TrainConfig.from_settings(
            table.dimension,
            hidden=options['hidden'],
            epochs=options['epochs'],
            seed=options['seed'],
            phase_length=options['phase_length'],
            learning_rate=options['lr'],
            temperature_start=options['temp'],
            temperature_decay=options['temp_decay'],
            temperature_min=options['temp_min'],
        )
        resume = load_checkpoint(options['resume']) if options['resume'] else None

        out = ensure_directory(options['out'])
        files = settings.TRAIN_OUTPUT_FILES
        inputs = {'corpus': options['corpus'], 'embeddings': options['embeddings']}
        manifest = build_manifest(config, inputs, timezone.now(), resumed_from=options['resume'])
        write_manifest(out / files['MANIFEST'], manifest)

        self.stdout.write(
            f'Training on {len(corpus)} documents (d={config.dimension}, H={config.hidden}, '
            f'{config.epochs} epochs, seed {config.seed})'
        )
        state = train(config, corpus, resume=resume)

        save_checkpoint(out / files['CHECKPOINT'], Checkpoint.from_state(state))
        if state.history:
            (out / files['LOSS_HISTORY']).write_text(emit_loss_plot_data(state.history), encoding='utf-8')
            last = state.history[-1]
            self.stdout.write(f'Final epoch {last.epoch} ({last.phase}): mean loss {last.mean_loss:.6f}')
        else:
            self.warning('No epochs were run; the checkpoint holds the initial parameters')

        write_manifest(out / files['MANIFEST'], complete_manifest(manifest, timezone.now()))
        self.success(f'Model written to {out}')
