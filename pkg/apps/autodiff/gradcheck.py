"""
Central finite-difference check of analytic gradients.
File: apps/autodiff/gradcheck.py
"""

import numpy as np

from apps.autodiff.tensor import ComputeGraph


def _evaluate(function, inputs):
    return function(ComputeGraph(), *inputs).item()


def finite_difference_check(function, inputs, epsilon=1e-5):
    """
    Compare backward() against central differences.

    Args:
        function: callable(graph, *inputs) returning a scalar Tensor built on graph.
        inputs: Tensors to differentiate with respect to. Their values are
            perturbed in place during the check and restored afterwards.
        epsilon: half step of the central difference.

    Returns:
        float: max over all input coordinates of
        |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    if epsilon <= 0:
        raise ValueError(f'epsilon must be positive, got {epsilon}')

    saved_flags = [tensor.requires_grad for tensor in inputs]
    saved_grads = [tensor.grad for tensor in inputs]
    try:
        for tensor in inputs:
            tensor.requires_grad = True
            tensor.zero_grad()
        graph = ComputeGraph()
        graph.backward(function(graph, *inputs))
        analytic = [tensor.grad.copy() for tensor in inputs]

        worst = 0.0
        for tensor, grad in zip(inputs, analytic):
            for index in np.ndindex(tensor.shape):
                original = tensor.values[index]
                tensor.values[index] = original + epsilon
                upper = _evaluate(function, inputs)
                tensor.values[index] = original - epsilon
                lower = _evaluate(function, inputs)
                tensor.values[index] = original

                numeric = (upper - lower) / (2.0 * epsilon)
                error = abs(grad[index] - numeric) / max(1e-8, abs(grad[index]) + abs(numeric))
                worst = max(worst, error)
        return worst
    finally:
        for tensor, flag, grad in zip(inputs, saved_flags, saved_grads):
            tensor.requires_grad = flag
            tensor.grad = grad
