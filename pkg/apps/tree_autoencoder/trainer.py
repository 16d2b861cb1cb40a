"""
Phased training of the tree auto-encoder.
File: apps/tree_autoencoder/trainer.py

Epochs alternate in blocks of phase_length between
- Weights: argmax structure, SGD on every parameter except q
- Structure: Gumbel-sampled structure, SGD on q only

One gradient step per document, in a single thread, so a fixed seed gives
bitwise-identical results.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from django.conf import settings

from apps.autodiff.tensor import ComputeGraph
from apps.core.exceptions import (
    CheckpointError,
    ConfigurationError,
    DataFormatError,
    NonFiniteLossError,
    TreeError,
)
from apps.corpus.loaders import OovStats, document_embeddings
from apps.tree_autoencoder.decoder import decode_document, reconstruction_loss
from apps.tree_autoencoder.encoder import encode_document
from apps.tree_autoencoder.models import Phase, SelectionMode
from apps.tree_autoencoder.params import STRUCTURE_PARAMETERS, WEIGHT_PARAMETERS, ModelParams
from apps.tree_autoencoder.serializers import TrainConfigSerializer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    dimension: int
    hidden: int = 32
    epochs: int = 200
    phase_length: int = 1
    learning_rate: float = 0.05
    temperature_start: float = 1.0
    temperature_min: float = 0.1
    temperature_decay: float = 0.99
    seed: int = 0
    shuffle: bool = True
    init_range: float = 0.1

    def __post_init__(self):
        serializer = TrainConfigSerializer(data=asdict(self))
        if not serializer.is_valid():
            raise ConfigurationError(serializer.errors)
        # normalize types (e.g. an int learning rate) so checkpoints are stable
        for name, value in serializer.validated_data.items():
            object.__setattr__(self, name, value)

    @classmethod
    def from_settings(cls, dimension, **overrides):
        """Settings defaults (TREE_AUTOENCODER) with explicit overrides on top."""
        defaults = settings.TREE_AUTOENCODER
        options = {
            'hidden': defaults['HIDDEN'],
            'epochs': defaults['EPOCHS'],
            'phase_length': defaults['PHASE_LENGTH'],
            'learning_rate': defaults['LEARNING_RATE'],
            'temperature_start': defaults['TEMPERATURE_START'],
            'temperature_min': defaults['TEMPERATURE_MIN'],
            'temperature_decay': defaults['TEMPERATURE_DECAY'],
            'seed': defaults['SEED'],
            'shuffle': defaults['SHUFFLE'],
            'init_range': defaults['INIT_RANGE'],
        }
        options.update({key: value for key, value in overrides.items() if value is not None})
        return cls(dimension=dimension, **options)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PreparedDocument:
    """A document reduced to its EDU embeddings, the training targets."""
    doc_id: str
    embeddings: np.ndarray


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    phase: str
    mean_loss: float


@dataclass
class DocumentPass:
    loss: object
    tree: object
    trace: list


@dataclass
class TrainingState:
    """Everything needed to continue a run exactly where it stopped."""
    config: TrainConfig
    params: ModelParams
    rng: np.random.Generator
    epoch: int = 0
    temperature: float = 1.0
    history: list = field(default_factory=list)


def phase_of(epoch, phase_length):
    """Blocks of phase_length epochs: even blocks train weights, odd blocks structure."""
    if phase_length < 1:
        raise ConfigurationError({'phase_length': ['must be at least 1']})
    return Phase.WEIGHTS if (epoch // phase_length) % 2 == 0 else Phase.STRUCTURE


def next_temperature(temperature, config):
    return max(config.temperature_min, temperature * config.temperature_decay)


def active_parameters(phase):
    return STRUCTURE_PARAMETERS if Phase(phase) == Phase.STRUCTURE else WEIGHT_PARAMETERS


def prepare_corpus(documents, table, stats=None):
    """Embed every document once; embeddings are frozen during training."""
    stats = stats if stats is not None else OovStats()
    prepared = [PreparedDocument(doc.doc_id, document_embeddings(doc, table, stats)) for doc in documents]
    if stats.all_oov_edus:
        logger.warning('%d of %d EDUs have no in-vocabulary token and embed as zeros',
                       stats.all_oov_edus, stats.edus)
    return prepared


def document_pass(graph, embeddings, params, mode, temperature, rng=None, check_tied=False):
    """Encode, decode along the same tree and score the reconstruction."""
    encoded = encode_document(graph, embeddings, params.encoder, mode, temperature, rng)
    decoded = decode_document(graph, encoded.root, encoded.tree, params.decoder)
    if check_tied and decoded.walked_tree != encoded.tree:
        raise TreeError('decoder traversal diverged from the encoder tree')
    loss = reconstruction_loss(graph, decoded.reconstructions, embeddings)
    return DocumentPass(loss=loss, tree=encoded.tree, trace=encoded.trace)


def _check_corpus(corpus, config):
    if not corpus:
        raise DataFormatError('Cannot train on an empty corpus.')
    for document in corpus:
        if document.embeddings.ndim != 2 or document.embeddings.shape[1] != config.dimension:
            raise ConfigurationError(
                {'dimension': [f'document {document.doc_id!r} has embeddings of shape '
                               f'{document.embeddings.shape}, expected (n, {config.dimension})']}
            )


def train_epoch(corpus, params, phase, config, rng, temperature=None, epoch=0, check_tied=None):
    """
    One pass over the corpus with SGD on the phase's active parameters.

    Returns the mean document loss. Parameters outside the active set are
    never written.
    """
    _check_corpus(corpus, config)
    phase = Phase(phase)
    temperature = config.temperature_start if temperature is None else temperature
    if check_tied is None:
        check_tied = settings.TREE_AUTOENCODER['DEBUG_TIED_TREES']
    mode = SelectionMode.SAMPLE if phase == Phase.STRUCTURE else SelectionMode.ARGMAX
    active = params.subset(active_parameters(phase))

    order = rng.permutation(len(corpus)) if config.shuffle else range(len(corpus))
    total = 0.0
    for position in order:
        document = corpus[int(position)]
        params.zero_grad()
        graph = ComputeGraph()
        result = document_pass(graph, document.embeddings, params, mode, temperature, rng, check_tied)
        value = result.loss.item()
        if not np.isfinite(value):
            raise NonFiniteLossError(document.doc_id, epoch, value)
        graph.backward(result.loss)
        for tensor in active:
            tensor.values -= config.learning_rate * tensor.grad
        total += value
        logger.debug('epoch %d %s %s loss %.6f trace %s', epoch, phase.value, document.doc_id, value, result.trace)

    return total / len(corpus)


def new_state(config):
    rng = np.random.default_rng(config.seed)
    params = ModelParams.initialize(config.dimension, config.hidden, rng, config.init_range)
    return TrainingState(config=config, params=params, rng=rng, temperature=config.temperature_start)


def resume_state(config, checkpoint):
    """Continue from a checkpoint; the model shape must match the new config."""
    saved = checkpoint.config
    if (saved.dimension, saved.hidden) != (config.dimension, config.hidden):
        raise CheckpointError(
            f'checkpoint model is d={saved.dimension}, H={saved.hidden}; '
            f'config asks for d={config.dimension}, H={config.hidden}'
        )
    changed = [name for name, value in saved.to_dict().items()
               if name != 'epochs' and getattr(config, name) != value]
    if changed:
        logger.warning('Resuming with changed settings: %s', ', '.join(changed))
    rng = np.random.default_rng()
    rng.bit_generator.state = checkpoint.rng_state
    return TrainingState(
        config=config,
        params=checkpoint.params.copy(),
        rng=rng,
        epoch=checkpoint.epoch,
        temperature=checkpoint.temperature,
        history=list(checkpoint.history),
    )


def train(config, corpus, resume=None, on_epoch=None):
    """
    Train (or continue training) until config.epochs epochs are done.

    Args:
        config: TrainConfig.
        corpus: list of PreparedDocument.
        resume: optional Checkpoint to continue from.
        on_epoch: optional callback(state, record) after every epoch.

    Returns:
        TrainingState with the final parameters and the per-epoch history.
    """
    _check_corpus(corpus, config)
    state = resume_state(config, resume) if resume is not None else new_state(config)
    if resume is not None:
        logger.info('Resuming at epoch %d of %d', state.epoch, config.epochs)

    check_tied = settings.TREE_AUTOENCODER['DEBUG_TIED_TREES']
    while state.epoch < config.epochs:
        phase = phase_of(state.epoch, config.phase_length)
        mean_loss = train_epoch(corpus, state.params, phase, config, state.rng,
                                state.temperature, state.epoch, check_tied)
        record = EpochRecord(state.epoch, phase.value, mean_loss)
        state.history.append(record)
        logger.info('epoch %d phase %s temperature %.4f mean loss %.6f',
                    state.epoch, phase.value, state.temperature, mean_loss)
        state.epoch += 1
        state.temperature = next_temperature(state.temperature, config)
        if on_epoch is not None:
            on_epoch(state, record)

    return state


def induce_tree(embeddings, params, mode=SelectionMode.ARGMAX):
    """Tree of one document under frozen parameters (no sampling)."""
    encoded = encode_document(ComputeGraph(), embeddings, params.encoder, mode)
    return encoded.tree
