import json
import math
import struct
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from apps.autodiff.gradcheck import finite_difference_check
from apps.autodiff.tensor import ComputeGraph, Tensor
from apps.core.exceptions import (
    CheckpointError,
    ConfigurationError,
    DataFormatError,
    NonFiniteLossError,
    SelectionError,
    ShapeError,
    TreeError,
)
from apps.core.utils import file_digest
from apps.corpus.loaders import EduDocument, dump_corpus
from apps.corpus.toy import dump_embeddings, make_toy_corpus
from apps.tree_autoencoder.checkpoint import Checkpoint, from_bytes, load_checkpoint, save_checkpoint, to_bytes
from apps.tree_autoencoder.decoder import LEFT, RIGHT, decode_document, reconstruction_loss, split
from apps.tree_autoencoder.encoder import (
    NodeState,
    compose,
    encode_document,
    leaf_transform,
    score_pairs,
    st_gumbel_select,
)
from apps.tree_autoencoder.models import Phase, SelectionMode
from apps.tree_autoencoder.params import (
    DECODER_PARAMETERS,
    ENCODER_PARAMETERS,
    PARAMETER_ORDER,
    STRUCTURE_PARAMETERS,
    WEIGHT_PARAMETERS,
    DecoderParams,
    EncoderParams,
    ModelParams,
)
from apps.tree_autoencoder.reports import emit_loss_plot_data, parse_loss_table
from apps.tree_autoencoder.trainer import (
    EpochRecord,
    PreparedDocument,
    TrainConfig,
    next_temperature,
    phase_of,
    prepare_corpus,
    train,
    train_epoch,
)
from apps.trees.baselines import baseline_tree
from apps.trees.files import dump_trees, load_trees
from apps.trees.models import BaselineKind
from apps.trees.structures import Internal, Leaf, validate_tree


def state(h, c):
    return NodeState(h=Tensor(h), c=Tensor(c))


def random_params(dimension, hidden, seed=0, init_range=0.5):
    return ModelParams.initialize(dimension, hidden, np.random.default_rng(seed), init_range)


def split_params(tensors):
    named = dict(zip(PARAMETER_ORDER, tensors))
    return (
        EncoderParams(**{name: named[name] for name in ENCODER_PARAMETERS}),
        DecoderParams(**{name: named[name] for name in DECODER_PARAMETERS}),
    )


def snapshot(params, names):
    named = params.named()
    return {name: named[name].values.tobytes() for name in names}


def small_corpus(documents=4, dimension=4, seed=0):
    toy = make_toy_corpus(seed=seed, documents=documents, dimension=dimension)
    return prepare_corpus(toy.documents, toy.table)


class LeafTransformTest(SimpleTestCase):
    """Tests for mapping EDU embeddings to leaf states"""

    def test_zero_weights(self):
        params = ModelParams.zeros(3, 2).encoder
        leaf = leaf_transform(ComputeGraph(), Tensor([1.0, -2.0, 0.5]), params)
        self.assertEqual(leaf.h.values.tolist(), [0.0, 0.0])
        self.assertEqual(leaf.c.values.tolist(), [0.0, 0.0])

    def test_scalar_example(self):
        params = ModelParams.zeros(1, 1).encoder
        params.W_leaf.values[:] = [[1.0], [2.0]]
        leaf = leaf_transform(ComputeGraph(), Tensor([0.5]), params)
        self.assertAlmostEqual(leaf.h.item(), 0.46212, places=5)
        self.assertEqual(leaf.c.item(), 1.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeError):
            leaf_transform(ComputeGraph(), Tensor([1.0, 2.0]), ModelParams.zeros(3, 2).encoder)


class ComposeTest(SimpleTestCase):
    """Tests for the binary Tree-LSTM cell"""

    def setUp(self):
        self.params = ModelParams.zeros(1, 1).encoder

    def test_zero_children(self):
        parent = compose(ComputeGraph(), state([0.0], [0.0]), state([0.0], [0.0]), self.params)
        self.assertEqual((parent.h.item(), parent.c.item()), (0.0, 0.0))

    def test_forget_gates_average_memories(self):
        parent = compose(ComputeGraph(), state([0.0], [2.0]), state([0.0], [2.0]), self.params)
        self.assertEqual(parent.c.item(), 2.0)
        self.assertAlmostEqual(parent.h.item(), 0.48201, places=5)

    def test_uneven_memories(self):
        parent = compose(ComputeGraph(), state([0.0], [4.0]), state([0.0], [0.0]), self.params)
        self.assertEqual(parent.c.item(), 2.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeError):
            compose(ComputeGraph(), state([0.0, 0.0], [0.0, 0.0]), state([0.0], [0.0]), self.params)


class ScorePairsTest(SimpleTestCase):
    """Tests for scoring candidate parents"""

    def test_single_candidate_for_two_nodes(self):
        params = random_params(2, 3).encoder
        candidates, logits = score_pairs(ComputeGraph(), [state([0.1] * 3, [0.2] * 3)] * 2, params)
        self.assertEqual(len(candidates), 1)
        self.assertEqual(logits.shape, (1,))

    def test_zero_query(self):
        params = random_params(2, 3).encoder
        params.q.values[:] = 0.0
        frontier = [state(np.full(3, v), np.full(3, -v)) for v in (0.1, 0.5, -0.3, 0.9)]
        _, logits = score_pairs(ComputeGraph(), frontier, params)
        self.assertEqual(logits.values.tolist(), [0.0, 0.0, 0.0])

    def test_logits_are_query_dot_candidate(self):
        params = ModelParams.zeros(1, 1).encoder
        params.q.values[:] = [1.0]
        frontier = [state([0.0], [c]) for c in (1.0, -2.0, 3.0)]
        candidates, logits = score_pairs(ComputeGraph(), frontier, params)
        self.assertEqual(logits.values.tolist(), [candidate.h.item() for candidate in candidates])

    def test_needs_two_nodes(self):
        with self.assertRaises(SelectionError):
            score_pairs(ComputeGraph(), [state([0.0], [0.0])], ModelParams.zeros(1, 1).encoder)


class GumbelSelectTest(SimpleTestCase):
    """Tests for straight-through Gumbel-Softmax selection"""

    def test_argmax(self):
        hard, _ = st_gumbel_select(ComputeGraph(), Tensor([2.0, 1.0]), 1.0, SelectionMode.ARGMAX)
        self.assertEqual(hard.tolist(), [1.0, 0.0])

    def test_ties_go_to_lowest_index(self):
        hard, _ = st_gumbel_select(ComputeGraph(), Tensor([0.5, 1.0, 1.0]), 1.0, SelectionMode.ARGMAX)
        self.assertEqual(hard.tolist(), [0.0, 1.0, 0.0])

    def test_high_temperature_flattens(self):
        _, soft = st_gumbel_select(ComputeGraph(), Tensor([3.0, -1.0, 0.5]), 1e6, SelectionMode.ARGMAX)
        np.testing.assert_allclose(soft.values, np.full(3, 1 / 3), atol=1e-5)

    def test_zero_noise_matches_argmax(self):
        logits = Tensor([0.2, 1.3, -0.4])
        sampled = st_gumbel_select(ComputeGraph(), logits, 0.7, SelectionMode.SAMPLE, noise=np.zeros(3))
        greedy = st_gumbel_select(ComputeGraph(), logits, 0.7, SelectionMode.ARGMAX)
        self.assertEqual(sampled[0].tolist(), greedy[0].tolist())
        self.assertEqual(sampled[1].values.tolist(), greedy[1].values.tolist())

    def test_left_mode(self):
        hard, _ = st_gumbel_select(ComputeGraph(), Tensor([-5.0, 5.0]), 1.0, SelectionMode.LEFT)
        self.assertEqual(hard.tolist(), [1.0, 0.0])

    def test_non_positive_temperature(self):
        for temperature in (0.0, -1.0, float('nan')):
            with self.subTest(temperature=temperature), self.assertRaises(SelectionError):
                st_gumbel_select(ComputeGraph(), Tensor([1.0]), temperature, SelectionMode.ARGMAX)

    def test_hard_is_one_hot(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            hard, _ = st_gumbel_select(ComputeGraph(), Tensor(rng.normal(size=5)), 0.5, SelectionMode.SAMPLE, rng)
            self.assertEqual(hard.sum(), 1.0)
            self.assertEqual(sorted(hard.tolist()), [0.0] * 4 + [1.0])

    def test_sampling_law(self):
        rng = np.random.default_rng(0)
        logits = Tensor([math.log(2.0), 0.0])
        for temperature in (0.3, 2.0):
            picks = sum(
                st_gumbel_select(ComputeGraph(), logits, temperature, SelectionMode.SAMPLE, rng)[0][0]
                for _ in range(10000)
            )
            self.assertAlmostEqual(picks / 10000, 2 / 3, delta=0.02)


class EncodeDocumentTest(SimpleTestCase):
    """Tests for bottom-up document encoding"""

    def test_single_edu(self):
        params = random_params(3, 2).encoder
        graph = ComputeGraph()
        encoded = encode_document(graph, np.array([[0.1, 0.2, 0.3]]), params)
        expected = leaf_transform(ComputeGraph(), Tensor([0.1, 0.2, 0.3]), params)
        self.assertEqual(encoded.tree, Leaf(0))
        self.assertEqual(encoded.trace, [])
        self.assertEqual(encoded.root.h.values.tolist(), expected.h.values.tolist())

    def test_two_edus_merge_forced(self):
        for seed in range(5):
            encoded = encode_document(ComputeGraph(), np.ones((2, 3)), random_params(3, 2, seed).encoder)
            self.assertEqual(encoded.trace, [0])
            self.assertEqual(encoded.tree, Internal(Leaf(0), Leaf(1)))

    def test_hand_set_scores(self):
        # leaves carry their embedding as memory; parents average the memories and score 0.5 tanh(c)
        params = ModelParams.zeros(1, 1).encoder
        params.W_leaf.values[:] = [[0.0], [1.0]]
        params.q.values[:] = [1.0]
        encoded = encode_document(ComputeGraph(), np.array([[10.0], [-9.0], [4.0], [4.0]]), params)
        self.assertEqual(encoded.trace, [2, 0, 0])
        self.assertEqual(encoded.tree, Internal(Internal(Leaf(0), Leaf(1)), Internal(Leaf(2), Leaf(3))))

    def test_left_selector_is_left_branching(self):
        params = random_params(3, 4, seed=2).encoder
        rng = np.random.default_rng(2)
        for n in range(2, 13):
            encoded = encode_document(ComputeGraph(), rng.normal(size=(n, 3)), params, SelectionMode.LEFT)
            self.assertEqual(encoded.tree, baseline_tree(BaselineKind.LEFT, n))

    def test_forced_trace(self):
        params = random_params(2, 3).encoder
        encoded = encode_document(ComputeGraph(), np.ones((4, 2)), params, trace=[1, 1, 0])
        self.assertEqual(encoded.trace, [1, 1, 0])
        with self.assertRaises(TreeError):
            encode_document(ComputeGraph(), np.ones((4, 2)), params, trace=[3, 0, 0])

    def test_injected_noise_steers_sampling(self):
        params = random_params(3, 4, seed=5).encoder
        n = 6
        noise = []
        for m in range(n - 1, 0, -1):
            step = np.zeros(m)
            step[-1] = 1e3
            noise.append(step)
        encoded = encode_document(ComputeGraph(), np.random.default_rng(5).normal(size=(n, 3)), params,
                                  SelectionMode.SAMPLE, noise=noise)
        self.assertEqual(encoded.tree, baseline_tree(BaselineKind.RIGHT, n))

    def test_injected_noise_matches_generator_draws(self):
        params = random_params(3, 4, seed=6).encoder
        embeddings = np.random.default_rng(6).normal(size=(7, 3))
        draws = np.random.default_rng(11)
        noise = [draws.gumbel(size=m) for m in range(6, 0, -1)]
        sampled = encode_document(ComputeGraph(), embeddings, params, SelectionMode.SAMPLE,
                                  rng=np.random.default_rng(11))
        injected = encode_document(ComputeGraph(), embeddings, params, SelectionMode.SAMPLE, noise=noise)
        self.assertEqual(injected.trace, sampled.trace)

    def test_empty_document(self):
        with self.assertRaises(ShapeError):
            encode_document(ComputeGraph(), np.zeros((0, 2)), random_params(2, 3).encoder)

    def test_sample_mode_gives_query_a_gradient(self):
        params = random_params(3, 4, seed=5)
        graph = ComputeGraph()
        rng = np.random.default_rng(5)
        embeddings = rng.normal(size=(5, 3))
        encoded = encode_document(graph, embeddings, params.encoder, SelectionMode.SAMPLE, 1.0, rng)
        decoded = decode_document(graph, encoded.root, encoded.tree, params.decoder)
        params.zero_grad()
        graph.backward(reconstruction_loss(graph, decoded.reconstructions, embeddings))
        self.assertGreater(np.abs(params.encoder.q.grad).sum(), 0.0)

    def test_structural_fuzz(self):
        rng = np.random.default_rng(99)
        for trial in range(1000):
            n = int(rng.integers(1, 13))
            params = ModelParams.initialize(3, 4, rng, 1.0)
            embeddings = rng.normal(size=(n, 3))
            mode = SelectionMode.SAMPLE if trial % 2 else SelectionMode.ARGMAX
            graph = ComputeGraph()
            encoded = encode_document(graph, embeddings, params.encoder, mode, 0.5, rng)
            self.assertEqual(validate_tree(encoded.tree), n)
            self.assertEqual(len(encoded.trace), n - 1)
            decoded = decode_document(graph, encoded.root, encoded.tree, params.decoder)
            self.assertEqual(len(decoded.reconstructions), n)
            self.assertEqual(decoded.walked_tree, encoded.tree)
            self.assertTrue(np.all(np.isfinite(encoded.root.h.values)))

    def test_pipeline_gradient(self):
        """encode, decode and loss against central differences on a fixed trace."""
        rng = np.random.default_rng(17)
        params = random_params(6, 8, seed=17)
        embeddings = rng.normal(size=(5, 6))
        trace = encode_document(ComputeGraph(), embeddings, params.encoder).trace

        def pipeline(graph, *tensors):
            encoder, decoder = split_params(tensors)
            encoded = encode_document(graph, embeddings, encoder, SelectionMode.ARGMAX, trace=trace)
            decoded = decode_document(graph, encoded.root, encoded.tree, decoder)
            return reconstruction_loss(graph, decoded.reconstructions, embeddings)

        error = finite_difference_check(pipeline, list(params.named().values()), 1e-5)
        self.assertLess(error, 1e-3)


class DecoderTest(SimpleTestCase):
    """Tests for the top-down splitting decoder"""

    def test_zero_split(self):
        child = split(ComputeGraph(), state([0.0], [0.0]), LEFT, ModelParams.zeros(1, 1).decoder)
        self.assertEqual((child.h.item(), child.c.item()), (0.0, 0.0))

    def test_split_example(self):
        child = split(ComputeGraph(), state([0.0], [2.0]), RIGHT, ModelParams.zeros(1, 1).decoder)
        self.assertEqual(child.c.item(), 1.0)
        self.assertAlmostEqual(child.h.item(), 0.38079, places=5)

    def test_cells_are_independent(self):
        params = random_params(2, 3).decoder
        parent = state([0.1, -0.2, 0.3], [0.5, 0.5, -1.0])
        before = split(ComputeGraph(), parent, LEFT, params).h.values.copy()
        params.W_R.values += 1.0
        after = split(ComputeGraph(), parent, LEFT, params).h.values
        self.assertEqual(before.tobytes(), after.tobytes())

    def test_left_split_leaves_right_cell_without_gradient(self):
        params = random_params(2, 3).decoder
        graph = ComputeGraph()
        for tensor in (params.W_L, params.W_R):
            tensor.zero_grad()
        child = split(graph, state([0.1, -0.2, 0.3], [0.5, 0.5, -1.0]), LEFT, params)
        graph.backward(graph.sum(child.h))
        self.assertFalse(np.any(params.W_R.grad))
        self.assertTrue(np.any(params.W_L.grad))

    def test_invalid_side(self):
        with self.assertRaises(ValueError):
            split(ComputeGraph(), state([0.0], [0.0]), 'middle', ModelParams.zeros(1, 1).decoder)

    def test_single_leaf_projects_root(self):
        params = random_params(2, 3).decoder
        root = state([0.1, 0.2, 0.3], [0.0, 0.0, 0.0])
        decoded = decode_document(ComputeGraph(), root, Leaf(0), params)
        expected = params.W_out.values @ root.h.values + params.b_out.values
        self.assertEqual(decoded.reconstructions[0].values.tolist(), expected.tolist())

    def test_zero_params_reconstruct_zeros(self):
        params = ModelParams.zeros(2, 3).decoder
        tree = baseline_tree(BaselineKind.BALANCED, 5)
        decoded = decode_document(ComputeGraph(), state([0.4, 0.1, -0.3], [1.0, 2.0, 3.0]), tree, params)
        self.assertEqual(len(decoded.reconstructions), 5)
        for reconstruction in decoded.reconstructions:
            self.assertEqual(reconstruction.values.tolist(), [0.0, 0.0])
        self.assertEqual(decoded.walked_tree, tree)

    def test_gradient(self):
        rng = np.random.default_rng(23)
        params = random_params(4, 5, seed=23).decoder
        tree = baseline_tree(BaselineKind.RANDOM, 6, seed=23)
        targets = rng.normal(size=(6, 4))
        h, c = Tensor(rng.normal(size=5)), Tensor(rng.normal(size=5))
        names = list(DECODER_PARAMETERS)

        def loss(graph, h, c, *tensors):
            decoder = DecoderParams(**dict(zip(names, tensors)))
            decoded = decode_document(graph, NodeState(h, c), tree, decoder)
            return reconstruction_loss(graph, decoded.reconstructions, targets)

        tensors = [h, c] + [getattr(params, name) for name in names]
        self.assertLess(finite_difference_check(loss, tensors, 1e-5), 1e-3)


class ReconstructionLossTest(SimpleTestCase):
    """Tests for the reconstruction MSE"""

    def test_perfect(self):
        self.assertEqual(reconstruction_loss(ComputeGraph(), [Tensor([1.0, 2.0])], [[1.0, 2.0]]).item(), 0.0)

    def test_one_leaf(self):
        self.assertEqual(reconstruction_loss(ComputeGraph(), [Tensor([1.0, 0.0])], [[0.0, 0.0]]).item(), 0.5)

    def test_two_leaves(self):
        loss = reconstruction_loss(ComputeGraph(), [Tensor([1.0, 1.0]), Tensor([0.0, 0.0])], np.zeros((2, 2)))
        self.assertEqual(loss.item(), 0.5)

    def test_mismatch(self):
        for targets in ([[0.0, 0.0]], [[0.0], [0.0]], [[0.0, 0.0], [0.0]]):
            with self.subTest(targets=targets), self.assertRaises(ShapeError):
                reconstruction_loss(ComputeGraph(), [Tensor([1.0, 1.0]), Tensor([0.0, 0.0])], targets)


class TrainConfigTest(SimpleTestCase):
    """Tests for training configuration"""

    def test_defaults(self):
        config = TrainConfig(dimension=16)
        self.assertEqual((config.hidden, config.epochs, config.phase_length), (32, 200, 1))
        self.assertEqual((config.temperature_start, config.temperature_decay, config.temperature_min),
                         (1.0, 0.99, 0.1))

    def test_invalid_values(self):
        for overrides in ({'learning_rate': 0.0}, {'temperature_decay': 0.0}, {'temperature_decay': 1.5},
                          {'temperature_min': 2.0}, {'hidden': 0}, {'phase_length': 0}, {'epochs': -1},
                          {'learning_rate': float('inf')}):
            with self.subTest(**overrides), self.assertRaises(ConfigurationError):
                TrainConfig(dimension=4, **overrides)

    def test_from_settings(self):
        with override_settings(TREE_AUTOENCODER={**settings.TREE_AUTOENCODER, 'HIDDEN': 7, 'SEED': 5}):
            config = TrainConfig.from_settings(4, seed=9, learning_rate=None)
        self.assertEqual((config.dimension, config.hidden, config.seed), (4, 7, 9))
        self.assertEqual(config.learning_rate, settings.TREE_AUTOENCODER['LEARNING_RATE'])


class PhaseTest(SimpleTestCase):
    """Tests for the phase schedule and annealing"""

    def test_alternating(self):
        self.assertEqual([phase_of(e, 1) for e in range(4)], [Phase.WEIGHTS, Phase.STRUCTURE] * 2)

    def test_blocks(self):
        self.assertEqual(''.join(phase_of(e, 2) for e in range(6)), 'WWSSWW')
        self.assertEqual(phase_of(25, 10), Phase.WEIGHTS)

    def test_invalid_length(self):
        with self.assertRaises(ConfigurationError):
            phase_of(0, 0)

    def test_temperature_non_increasing_with_floor(self):
        config = TrainConfig(dimension=2, temperature_start=1.0, temperature_decay=0.5, temperature_min=0.1)
        temperature, seen = config.temperature_start, []
        for _ in range(10):
            temperature = next_temperature(temperature, config)
            seen.append(temperature)
        self.assertEqual(seen, sorted(seen, reverse=True))
        self.assertEqual(min(seen), 0.1)


class TrainEpochTest(SimpleTestCase):
    """Tests for one pass of phased SGD"""

    def setUp(self):
        self.corpus = small_corpus()
        self.config = TrainConfig(dimension=4, hidden=4, epochs=20, learning_rate=0.05)

    def test_phase_isolation(self):
        rng = np.random.default_rng(self.config.seed)
        params = ModelParams.initialize(4, 4, rng, self.config.init_range)
        for epoch in range(20):
            phase = phase_of(epoch, self.config.phase_length)
            frozen = WEIGHT_PARAMETERS if phase == Phase.STRUCTURE else STRUCTURE_PARAMETERS
            active = STRUCTURE_PARAMETERS if phase == Phase.STRUCTURE else WEIGHT_PARAMETERS
            before_frozen, before_active = snapshot(params, frozen), snapshot(params, active)
            train_epoch(self.corpus, params, phase, self.config, rng, epoch=epoch)
            self.assertEqual(snapshot(params, frozen), before_frozen)
            self.assertNotEqual(snapshot(params, active), before_active)

    def test_empty_corpus(self):
        with self.assertRaises(DataFormatError):
            train_epoch([], ModelParams.zeros(4, 4), Phase.WEIGHTS, self.config, np.random.default_rng(0))

    def test_non_finite_loss_names_document(self):
        corpus = [PreparedDocument('huge', np.full((2, 4), 1e200))]
        params = random_params(4, 4)
        with np.errstate(over='ignore', invalid='ignore'), self.assertRaises(NonFiniteLossError) as ctx:
            train_epoch(corpus, params, Phase.WEIGHTS, self.config, np.random.default_rng(0))
        self.assertEqual(ctx.exception.doc_id, 'huge')

    def test_weights_phase_descends_on_fixed_tree(self):
        rng = np.random.default_rng(4)
        corpus = [PreparedDocument('d1', rng.normal(size=(2, 4)))]
        config = TrainConfig(dimension=4, hidden=4, learning_rate=0.01, shuffle=False)
        params = ModelParams.initialize(4, 4, rng, config.init_range)
        losses = [train_epoch(corpus, params, Phase.WEIGHTS, config, rng) for _ in range(50)]
        for previous, current in zip(losses, losses[1:]):
            self.assertLessEqual(current, previous)

    def test_dimension_mismatch(self):
        with self.assertRaises(ConfigurationError):
            train_epoch(self.corpus, ModelParams.zeros(5, 4), Phase.WEIGHTS,
                        TrainConfig(dimension=5, hidden=4), np.random.default_rng(0))


class TrainTest(SimpleTestCase):
    """Tests for full training runs"""

    def setUp(self):
        self.corpus = small_corpus(documents=5)

    def config(self, **overrides):
        options = {'dimension': 4, 'hidden': 4, 'epochs': 10, 'seed': 3}
        options.update(overrides)
        return TrainConfig(**options)

    def test_zero_epochs_returns_initialization(self):
        config = self.config(epochs=0)
        state = train(config, self.corpus)
        expected = ModelParams.initialize(4, 4, np.random.default_rng(3), config.init_range)
        self.assertEqual(state.history, [])
        self.assertEqual(snapshot(state.params, PARAMETER_ORDER), snapshot(expected, PARAMETER_ORDER))

    def test_empty_corpus(self):
        with self.assertRaises(DataFormatError):
            train(self.config(), [])

    def test_history(self):
        state = train(self.config(), self.corpus)
        self.assertEqual([record.epoch for record in state.history], list(range(10)))
        self.assertEqual([record.phase for record in state.history], ['W', 'S'] * 5)
        self.assertTrue(all(math.isfinite(record.mean_loss) for record in state.history))
        expected = 1.0
        for _ in range(10):
            expected *= 0.99
        self.assertEqual(state.temperature, expected)

    def test_deterministic(self):
        first = to_bytes(Checkpoint.from_state(train(self.config(), self.corpus)))
        second = to_bytes(Checkpoint.from_state(train(self.config(), self.corpus)))
        self.assertEqual(first, second)

    def test_resume_matches_uninterrupted_run(self):
        straight = train(self.config(epochs=10), self.corpus)
        halfway = train(self.config(epochs=5), self.corpus)
        restored = from_bytes(to_bytes(Checkpoint.from_state(halfway)))
        resumed = train(self.config(epochs=10), self.corpus, resume=restored)
        self.assertEqual(to_bytes(Checkpoint.from_state(resumed)), to_bytes(Checkpoint.from_state(straight)))

    def test_resume_rejects_other_model_size(self):
        checkpoint = Checkpoint.from_state(train(self.config(epochs=1), self.corpus))
        with self.assertRaises(CheckpointError):
            train(self.config(hidden=5), self.corpus, resume=checkpoint)

    def test_overfits_toy_corpus(self):
        toy = make_toy_corpus()
        corpus = prepare_corpus(toy.documents, toy.table)
        state = train(TrainConfig(dimension=16), corpus)
        self.assertEqual(len(state.history), 200)
        self.assertLessEqual(state.history[-1].mean_loss, 0.1 * state.history[0].mean_loss)


class CheckpointTest(SimpleTestCase):
    """Tests for the binary checkpoint container"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        config = TrainConfig(dimension=3, hidden=2, epochs=2, seed=1)
        corpus = [PreparedDocument('d1', np.random.default_rng(1).normal(size=(3, 3)))]
        self.checkpoint = Checkpoint.from_state(train(config, corpus))
        self.data = to_bytes(self.checkpoint)

    def tearDown(self):
        self.tmp.cleanup()

    def test_magic(self):
        self.assertEqual(self.data[:4], b'TAE1')

    def test_save_load_save_is_identical(self):
        path = save_checkpoint(self.dir / 'model.tae', self.checkpoint)
        loaded = load_checkpoint(path)
        self.assertEqual(to_bytes(loaded), self.data)
        for name, tensor in self.checkpoint.params.named().items():
            self.assertEqual(loaded.params.named()[name].values.tobytes(), tensor.values.tobytes())
        self.assertEqual(loaded.rng_state, self.checkpoint.rng_state)
        self.assertEqual(loaded.history, self.checkpoint.history)

    def test_version_bump_rejected(self):
        with self.assertRaises(CheckpointError) as ctx:
            from_bytes(b'TAE2' + self.data[4:])
        self.assertIn('version', str(ctx.exception))

    def test_bad_magic(self):
        with self.assertRaises(CheckpointError):
            from_bytes(b'XYZ1' + self.data[4:])

    def test_truncated(self):
        for size in (3, 10, len(self.data) - 8):
            with self.subTest(size=size), self.assertRaises(CheckpointError):
                from_bytes(self.data[:size])

    def test_trailing_bytes(self):
        with self.assertRaises(CheckpointError):
            from_bytes(self.data + b'\0' * 8)

    def test_shape_mismatch(self):
        (length,) = struct.unpack_from('<Q', self.data, 4)
        header = json.loads(self.data[12:12 + length])
        header['config']['hidden'] = 3
        encoded = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
        tampered = b'TAE1' + struct.pack('<Q', len(encoded)) + encoded + self.data[12 + length:]
        with self.assertRaises(CheckpointError) as ctx:
            from_bytes(tampered)
        self.assertIn('shape', str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.dir / 'missing.tae')

    def rewrite_header(self, edit):
        (length,) = struct.unpack_from('<Q', self.data, 4)
        header = json.loads(self.data[12:12 + length])
        edit(header)
        encoded = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
        return b'TAE1' + struct.pack('<Q', len(encoded)) + encoded + self.data[12 + length:]

    def test_corrupted_header_fields(self):
        edits = {
            'missing epoch': lambda h: h.pop('epoch'),
            'missing history': lambda h: h.pop('history'),
            'negative temperature': lambda h: h.update(temperature=-1.0),
            'short history row': lambda h: h['history'].append([2, 'W']),
            'unknown phase': lambda h: h['history'].append([2, 'X', 0.5]),
            'text loss': lambda h: h['history'].append([2, 'W', 'low']),
            'history not rows': lambda h: h.update(history=[3]),
            'generator state': lambda h: h.update(rng_state={'bit_generator': 'PCG64'}),
            'tensor directory not a list': lambda h: h.update(tensors=7),
        }
        for label, edit in edits.items():
            with self.subTest(label), self.assertRaises(CheckpointError):
                from_bytes(self.rewrite_header(edit))

    def test_restored_state_resumes(self):
        loaded = from_bytes(self.data)
        generator = np.random.default_rng()
        generator.bit_generator.state = loaded.rng_state
        self.assertEqual(generator.bit_generator.state, self.checkpoint.rng_state)
        self.assertEqual([record.phase for record in loaded.history], ['W', 'S'])


class LossTableTest(SimpleTestCase):
    """Tests for the loss history table"""

    def test_one_epoch(self):
        text = emit_loss_plot_data([EpochRecord(0, 'W', 0.25)])
        self.assertEqual(text.splitlines(), ['epoch,phase,mean_loss', '0,W,0.250000000000'])

    def test_phases_and_round_trip(self):
        history = [EpochRecord(e, phase_of(e, 1).value, 1 / (e + 3)) for e in range(6)]
        parsed = parse_loss_table(emit_loss_plot_data(history))
        self.assertEqual([r.phase for r in parsed], ['W', 'S', 'W', 'S', 'W', 'S'])
        for original, restored in zip(history, parsed):
            self.assertAlmostEqual(original.mean_loss, restored.mean_loss, delta=1e-12)

    def test_empty_history(self):
        with self.assertRaises(ValueError):
            emit_loss_plot_data([])

    def test_bad_row(self):
        with self.assertRaises(DataFormatError) as ctx:
            parse_loss_table('epoch,phase,mean_loss\n0,X,0.1\n')
        self.assertEqual(ctx.exception.line, 2)


class PipelineCommandTest(SimpleTestCase):
    """train, induce, eval and stats on the toy corpus"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        toy = make_toy_corpus(documents=6)
        self.documents = toy.documents
        self.corpus = self.dir / 'corpus.jsonl'
        self.embeddings = self.dir / 'embeddings.txt'
        self.gold = self.dir / 'gold.tsv'
        dump_corpus(toy.documents, self.corpus)
        dump_embeddings(toy.vectors, self.embeddings)
        dump_trees(toy.gold.items(), self.gold)

    def tearDown(self):
        self.tmp.cleanup()

    def call(self, *args):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO())
        return out.getvalue()

    def train(self, out, *extra):
        self.call('train', '--corpus', str(self.corpus), '--embeddings', str(self.embeddings),
                  '--out', str(out), '--hidden', '4', '--seed', '2', *extra)
        return Path(out)

    def test_full_pipeline(self):
        run = self.train(self.dir / 'run', '--epochs', '4')
        files = settings.TRAIN_OUTPUT_FILES
        history = (run / files['LOSS_HISTORY']).read_text().splitlines()
        self.assertEqual(len(history), 5)

        manifest = json.loads((run / files['MANIFEST']).read_text())
        self.assertEqual(manifest['seed'], 2)
        self.assertEqual(manifest['config']['hidden'], 4)
        self.assertEqual(manifest['inputs']['corpus']['digest'], file_digest(self.corpus))
        self.assertIsNotNone(manifest['finished_at'])

        trees_path = self.dir / 'trees.tsv'
        self.call('induce', '--checkpoint', str(run / files['CHECKPOINT']),
                  '--corpus', str(self.corpus), '--out', str(trees_path))
        trees = load_trees(trees_path)
        self.assertEqual(list(trees), [document.doc_id for document in self.documents])

        report = self.call('eval', '--pred', str(trees_path), '--gold', str(self.gold)).splitlines()
        self.assertEqual(len(report), len(self.documents) + 2)
        self.assertTrue(report[-1].startswith('micro\t'))
        self.assertIn('mean_height', self.call('stats', '--trees', str(trees_path)))

    def test_runs_are_reproducible(self):
        files = settings.TRAIN_OUTPUT_FILES
        first = self.train(self.dir / 'a', '--epochs', '3')
        second = self.train(self.dir / 'b', '--epochs', '3')
        self.assertEqual((first / files['CHECKPOINT']).read_bytes(), (second / files['CHECKPOINT']).read_bytes())

        outputs = []
        for run, workers in ((first, '1'), (second, '3')):
            path = run / 'trees.tsv'
            self.call('induce', '--checkpoint', str(run / files['CHECKPOINT']), '--corpus', str(self.corpus),
                      '--out', str(path), '--workers', workers)
            outputs.append(path.read_bytes())
        self.assertEqual(outputs[0], outputs[1])

    def test_resume_matches_uninterrupted_run(self):
        files = settings.TRAIN_OUTPUT_FILES
        straight = self.train(self.dir / 'straight', '--epochs', '4')
        half = self.train(self.dir / 'half', '--epochs', '2')
        resumed = self.train(self.dir / 'resumed', '--epochs', '4', '--resume', str(half / files['CHECKPOINT']))
        self.assertEqual((straight / files['CHECKPOINT']).read_bytes(),
                         (resumed / files['CHECKPOINT']).read_bytes())
        manifest = json.loads((resumed / files['MANIFEST']).read_text())
        self.assertEqual(manifest['resumed_from']['digest'], file_digest(half / files['CHECKPOINT']))

    def test_single_edu_document(self):
        run = self.train(self.dir / 'run', '--epochs', '1')
        single = self.dir / 'single.jsonl'
        dump_corpus([EduDocument('d1', [['pasta', 'sauce']])], single)
        out = self.dir / 'single.tsv'
        self.call('induce', '--checkpoint', str(run / 'model.tae'), '--corpus', str(single),
                  '--out', str(out), '--embeddings', str(self.embeddings))
        self.assertEqual(out.read_text(), 'd1\t0\n')

    def test_left_selector(self):
        run = self.train(self.dir / 'run', '--epochs', '1')
        out = self.dir / 'left.tsv'
        self.call('induce', '--checkpoint', str(run / 'model.tae'), '--corpus', str(self.corpus),
                  '--out', str(out), '--selector', 'left')
        report = self.call('stats', '--trees', str(out))
        self.assertIn('right_branching\t0.000000', report)

    def test_changed_embeddings_detected(self):
        run = self.train(self.dir / 'run', '--epochs', '1')
        with open(self.embeddings, 'a', encoding='utf-8') as f:
            f.write('extra ' + ' '.join(['0.0'] * 16) + '\n')
        with self.assertRaises(CommandError) as ctx:
            self.call('induce', '--checkpoint', str(run / 'model.tae'), '--corpus', str(self.corpus),
                      '--out', str(self.dir / 'x.tsv'))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_invalid_config_exits_with_one(self):
        with self.assertRaises(CommandError) as ctx:
            self.train(self.dir / 'run', '--lr', '0')
        self.assertEqual(ctx.exception.returncode, 1)

    def test_missing_input_exits_with_one(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('train', '--corpus', str(self.dir / 'missing.jsonl'), '--embeddings',
                      str(self.embeddings), '--out', str(self.dir / 'run'))
        self.assertEqual(ctx.exception.returncode, 1)
