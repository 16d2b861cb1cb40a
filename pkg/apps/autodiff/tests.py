import numpy as np
from django.test import SimpleTestCase

from apps.autodiff.gradcheck import finite_difference_check
from apps.autodiff.tensor import ComputeGraph, Tensor, apply
from apps.core.exceptions import GraphError, ShapeError


def weighted_sum(graph, y, weights):
    """Contract an output against fixed weights so every coordinate matters."""
    return graph.sum(graph.mul(y, graph.constant(weights)))


class TensorTest(SimpleTestCase):
    """Tests for the Tensor container"""

    def test_scalar_becomes_shape_one(self):
        tensor = Tensor(3.0)
        self.assertEqual(tensor.shape, (1,))
        self.assertEqual(tensor.item(), 3.0)

    def test_values_are_copied(self):
        source = np.array([1.0, 2.0])
        tensor = Tensor(source)
        source[0] = 9.0
        self.assertEqual(tensor.values[0], 1.0)

    def test_zero_extent_rejected(self):
        with self.assertRaises(ShapeError):
            Tensor(np.zeros((0, 2)))

    def test_grad_absent_until_backward(self):
        self.assertIsNone(Tensor([1.0], requires_grad=True).grad)


class ForwardOpTest(SimpleTestCase):
    """Forward values of the primitive ops"""

    def test_matmul(self):
        result = apply('matmul', Tensor([[1, 2], [3, 4]]), Tensor([[1], [1]]))
        np.testing.assert_array_equal(result.values, [[3], [7]])

    def test_matrix_vector_and_vector_matrix(self):
        matrix = Tensor([[1, 2], [3, 4]])
        np.testing.assert_array_equal(apply('matmul', matrix, Tensor([1, 1])).values, [3, 7])
        np.testing.assert_array_equal(apply('matmul', Tensor([1, 1]), matrix).values, [4, 6])

    def test_sigmoid_at_zero(self):
        self.assertEqual(apply('sigmoid', Tensor([0.0])).values[0], 0.5)

    def test_softmax_symmetric(self):
        np.testing.assert_array_equal(apply('softmax_lastdim', Tensor([0.0, 0.0])).values, [0.5, 0.5])

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            result = apply('softmax_lastdim', Tensor(rng.normal(scale=10, size=(3, 5)))).values
            self.assertTrue(np.all(result > 0) and np.all(result < 1))
            np.testing.assert_allclose(result.sum(axis=-1), np.ones(3), rtol=0, atol=1e-12)

    def test_concat_and_slice(self):
        graph = ComputeGraph()
        joined = graph.concat(Tensor([1, 2]), Tensor([3]))
        np.testing.assert_array_equal(joined.values, [1, 2, 3])
        np.testing.assert_array_equal(graph.slice(joined, 1, 3).values, [2, 3])

    def test_mse_and_sum_are_scalars(self):
        graph = ComputeGraph()
        self.assertEqual(graph.mse(Tensor([1.0, 0.0]), Tensor([0.0, 0.0])).values.tolist(), [0.5])
        self.assertEqual(graph.sum(Tensor([[1.0, 2.0], [3.0, 4.0]])).values.tolist(), [10.0])

    def test_straight_through_forward_is_exact(self):
        result = apply('straight_through', Tensor([0.3, 0.7]), hard=np.array([0.0, 1.0]))
        self.assertEqual(result.values.tolist(), [0.0, 1.0])

    def test_apply_is_pure(self):
        x = Tensor(np.random.default_rng(1).normal(size=7))
        first = apply('softmax_lastdim', x).values
        second = apply('softmax_lastdim', x).values
        self.assertEqual(first.tobytes(), second.tobytes())


class ShapeCheckTest(SimpleTestCase):
    """Shape validation (no broadcasting anywhere)"""

    def test_matmul_inner_mismatch_names_op(self):
        with self.assertRaises(ShapeError) as ctx:
            apply('matmul', Tensor(np.ones((2, 3))), Tensor(np.ones((2, 1))))
        self.assertIn('matmul', str(ctx.exception))

    def test_elementwise_mismatch(self):
        with self.assertRaises(ShapeError) as ctx:
            apply('add', Tensor([1.0, 2.0]), Tensor([1.0]))
        self.assertEqual(ctx.exception.expected, (2,))
        self.assertEqual(ctx.exception.actual, (1,))
        with self.assertRaises(ShapeError):
            apply('elementwise_multiply', Tensor(np.ones((2, 1))), Tensor(np.ones((1, 2))))

    def test_slice_out_of_range(self):
        with self.assertRaises(ShapeError):
            apply('slice', Tensor([1.0, 2.0]), start=1, stop=3)
        with self.assertRaises(ShapeError):
            apply('slice', Tensor([1.0, 2.0]), start=1, stop=1)

    def test_unknown_op(self):
        with self.assertRaises(GraphError):
            apply('convolve', Tensor([1.0]))


class BackwardTest(SimpleTestCase):
    """Reverse-mode gradients"""

    def test_sigmoid_gradient_at_zero(self):
        x = Tensor([0.0], requires_grad=True)
        graph = ComputeGraph()
        graph.backward(graph.sigmoid(x))
        self.assertEqual(x.grad.tolist(), [0.25])

    def test_mse_at_target_is_flat(self):
        x = Tensor([1.0, -2.0, 3.0], requires_grad=True)
        graph = ComputeGraph()
        graph.backward(graph.mse(x, Tensor([1.0, -2.0, 3.0])))
        self.assertEqual(x.grad.tolist(), [0.0, 0.0, 0.0])

    def test_square(self):
        x = Tensor([3.0], requires_grad=True)
        graph = ComputeGraph()
        graph.backward(graph.sum(graph.mul(x, x)))
        self.assertEqual(x.grad.tolist(), [6.0])

    def test_ignored_parameter_gets_exact_zero(self):
        used = Tensor([1.0, 2.0], requires_grad=True)
        ignored = Tensor([5.0, 6.0], requires_grad=True)
        graph = ComputeGraph()
        graph.tanh(ignored)
        graph.backward(graph.sum(graph.tanh(used)))
        self.assertEqual(ignored.grad.tolist(), [0.0, 0.0])
        self.assertNotEqual(used.grad.tolist(), [0.0, 0.0])

    def test_backward_accumulates(self):
        x = Tensor([2.0], requires_grad=True)
        graph = ComputeGraph()
        loss = graph.sum(graph.scale(x, 3.0))
        graph.backward(loss)
        graph.backward(loss)
        self.assertEqual(x.grad.tolist(), [6.0])
        x.zero_grad()
        self.assertEqual(x.grad.tolist(), [0.0])

    def test_non_scalar_loss_rejected(self):
        graph = ComputeGraph()
        y = graph.tanh(Tensor([1.0, 2.0], requires_grad=True))
        with self.assertRaises(GraphError):
            graph.backward(y)

    def test_foreign_loss_rejected(self):
        other = ComputeGraph()
        loss = other.sum(Tensor([1.0], requires_grad=True))
        with self.assertRaises(GraphError):
            ComputeGraph().backward(loss)

    def test_straight_through_passes_gradient_to_soft(self):
        soft = Tensor([0.3, 0.7], requires_grad=True)
        graph = ComputeGraph()
        hard = graph.straight_through(soft, [0.0, 1.0])
        graph.backward(weighted_sum(graph, hard, np.array([2.0, 5.0])))
        self.assertEqual(soft.grad.tolist(), [2.0, 5.0])

    def test_inputs_precede_consumers(self):
        graph = ComputeGraph()
        x = Tensor([1.0], requires_grad=True)
        graph.sum(graph.sigmoid(graph.tanh(x)))
        self.assertEqual(graph.nodes[0].op, 'leaf')
        for node_id, node in enumerate(graph.nodes):
            self.assertTrue(all(i < node_id for i in node.inputs))


class FiniteDifferenceTest(SimpleTestCase):
    """Analytic gradients against central differences"""

    def test_linear_function_is_exact(self):
        x = Tensor([0.3, -1.2, 4.0])
        error = finite_difference_check(lambda g, x: g.sum(g.scale(x, 3.0)), [x])
        self.assertLess(error, 1e-8)

    def test_sigmoid(self):
        error = finite_difference_check(lambda g, x: g.sum(g.sigmoid(x)), [Tensor([0.0])], 1e-5)
        self.assertLess(error, 1e-6)

    def test_mse(self):
        rng = np.random.default_rng(3)
        x, t = Tensor(rng.normal(size=8)), Tensor(rng.normal(size=8))
        self.assertLess(finite_difference_check(lambda g, x, t: g.mse(x, t), [x, t], 1e-5), 1e-6)

    def test_inputs_restored(self):
        x = Tensor([0.5, 0.25])
        finite_difference_check(lambda g, x: g.sum(g.tanh(x)), [x])
        self.assertEqual(x.values.tolist(), [0.5, 0.25])
        self.assertFalse(x.requires_grad)
        self.assertIsNone(x.grad)

    def test_non_positive_epsilon_rejected(self):
        with self.assertRaises(ValueError):
            finite_difference_check(lambda g, x: g.sum(x), [Tensor([1.0])], 0.0)

    def test_every_primitive_on_random_inputs(self):
        """100 random draws per op, relative error below 1e-4."""
        rng = np.random.default_rng(42)

        def unary(op, **attrs):
            def build():
                x = Tensor(rng.normal(size=(2, 3)))
                w = rng.normal(size=apply(op, x, **attrs).shape)
                return (lambda g, x: weighted_sum(g, g.apply(op, x, **attrs), w)), [x]
            return build

        def binary(op):
            def build():
                a, b = Tensor(rng.normal(size=4)), Tensor(rng.normal(size=4))
                w = rng.normal(size=4)
                return (lambda g, a, b: weighted_sum(g, g.apply(op, a, b), w)), [a, b]
            return build

        def matmul():
            a, b = Tensor(rng.normal(size=(3, 2))), Tensor(rng.normal(size=(2, 4)))
            w = rng.normal(size=(3, 4))
            return (lambda g, a, b: weighted_sum(g, g.matmul(a, b), w)), [a, b]

        def matvec():
            a, b = Tensor(rng.normal(size=(3, 2))), Tensor(rng.normal(size=2))
            w = rng.normal(size=3)
            return (lambda g, a, b: weighted_sum(g, g.matmul(a, b), w)), [a, b]

        def vecmat():
            a, b = Tensor(rng.normal(size=3)), Tensor(rng.normal(size=(3, 2)))
            w = rng.normal(size=2)
            return (lambda g, a, b: weighted_sum(g, g.matmul(a, b), w)), [a, b]

        def concat():
            a, b = Tensor(rng.normal(size=2)), Tensor(rng.normal(size=3))
            w = rng.normal(size=5)
            return (lambda g, a, b: weighted_sum(g, g.concat(a, b), w)), [a, b]

        def stack():
            a, b = Tensor(rng.normal(size=3)), Tensor(rng.normal(size=3))
            w = rng.normal(size=(2, 3))
            return (lambda g, a, b: weighted_sum(g, g.stack(a, b), w)), [a, b]

        def total():
            x = Tensor(rng.normal(size=5))
            return (lambda g, x: g.sum(g.mul(x, x))), [x]

        def mse():
            x, t = Tensor(rng.normal(size=6)), Tensor(rng.normal(size=6))
            return (lambda g, x, t: g.mse(x, t)), [x, t]

        builders = {
            'matmul': matmul,
            'matmul_vector': matvec,
            'vector_matmul': vecmat,
            'add': binary('add'),
            'elementwise_multiply': binary('elementwise_multiply'),
            'concat': concat,
            'slice': unary('slice', start=1, stop=3),
            'sigmoid': unary('sigmoid'),
            'tanh': unary('tanh'),
            'softmax_lastdim': unary('softmax_lastdim'),
            'scale': unary('scale', factor=-1.7),
            'sum': total,
            'mse': mse,
            'stack': stack,
        }
        for name, build in builders.items():
            with self.subTest(op=name):
                for _ in range(100):
                    function, inputs = build()
                    self.assertLess(finite_difference_check(function, inputs, 1e-5), 1e-4)
