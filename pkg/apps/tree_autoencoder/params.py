"""
Trainable parameters of the tree auto-encoder.
File: apps/tree_autoencoder/params.py

The parameters split into two disjoint sets for phased training:
- structure set: the selector query q
- weight set: everything that builds or decodes hidden states
"""

from dataclasses import dataclass, fields

import numpy as np

from apps.autodiff.tensor import Tensor
from apps.core.exceptions import ShapeError

STRUCTURE_PARAMETERS = ('q',)
WEIGHT_PARAMETERS = (
    'W_leaf', 'b_leaf', 'W_comp', 'b_comp',
    'W_L', 'b_L', 'W_R', 'b_R', 'W_out', 'b_out',
)
ENCODER_PARAMETERS = ('W_leaf', 'b_leaf', 'W_comp', 'b_comp', 'q')
DECODER_PARAMETERS = ('W_L', 'b_L', 'W_R', 'b_R', 'W_out', 'b_out')

# Fixed order used for initialization and the checkpoint tensor directory
PARAMETER_ORDER = ENCODER_PARAMETERS + DECODER_PARAMETERS


def parameter_shapes(dimension, hidden):
    """Shape of every parameter for embedding dimension d and hidden size H."""
    d, h = dimension, hidden
    return {
        'W_leaf': (2 * h, d),
        'b_leaf': (2 * h,),
        'W_comp': (5 * h, 2 * h),
        'b_comp': (5 * h,),
        'q': (h,),
        'W_L': (4 * h, h),
        'b_L': (4 * h,),
        'W_R': (4 * h, h),
        'b_R': (4 * h,),
        'W_out': (d, h),
        'b_out': (d,),
    }


@dataclass
class EncoderParams:
    W_leaf: Tensor
    b_leaf: Tensor
    W_comp: Tensor
    b_comp: Tensor
    q: Tensor

    @property
    def hidden(self):
        return self.q.shape[0]

    @property
    def dimension(self):
        return self.W_leaf.shape[1]


@dataclass
class DecoderParams:
    W_L: Tensor
    b_L: Tensor
    W_R: Tensor
    b_R: Tensor
    W_out: Tensor
    b_out: Tensor

    @property
    def hidden(self):
        return self.W_L.shape[1]

    @property
    def dimension(self):
        return self.W_out.shape[0]


@dataclass
class ModelParams:
    encoder: EncoderParams
    decoder: DecoderParams

    @classmethod
    def from_arrays(cls, dimension, hidden, arrays):
        """Wrap numpy arrays (keyed by parameter name) after checking their shapes."""
        shapes = parameter_shapes(dimension, hidden)
        missing = set(shapes) - set(arrays)
        if missing:
            raise ShapeError('parameters', sorted(shapes), sorted(arrays))
        tensors = {}
        for name, shape in shapes.items():
            array = np.asarray(arrays[name], dtype=np.float64)
            if array.shape != shape:
                raise ShapeError(f'parameter {name}', shape, array.shape)
            tensors[name] = Tensor(array, requires_grad=True, name=name)
        return cls(
            EncoderParams(**{name: tensors[name] for name in ENCODER_PARAMETERS}),
            DecoderParams(**{name: tensors[name] for name in DECODER_PARAMETERS}),
        )

    @classmethod
    def initialize(cls, dimension, hidden, rng, init_range=0.1):
        """Uniform(-init_range, init_range) draws in PARAMETER_ORDER."""
        shapes = parameter_shapes(dimension, hidden)
        arrays = {name: rng.uniform(-init_range, init_range, size=shapes[name]) for name in PARAMETER_ORDER}
        return cls.from_arrays(dimension, hidden, arrays)

    @classmethod
    def zeros(cls, dimension, hidden):
        shapes = parameter_shapes(dimension, hidden)
        return cls.from_arrays(dimension, hidden, {name: np.zeros(shape) for name, shape in shapes.items()})

    @property
    def dimension(self):
        return self.encoder.dimension

    @property
    def hidden(self):
        return self.encoder.hidden

    def named(self):
        """{name: Tensor} in PARAMETER_ORDER."""
        tensors = {f.name: getattr(self.encoder, f.name) for f in fields(self.encoder)}
        tensors.update({f.name: getattr(self.decoder, f.name) for f in fields(self.decoder)})
        return {name: tensors[name] for name in PARAMETER_ORDER}

    def subset(self, names):
        named = self.named()
        return [named[name] for name in names]

    def zero_grad(self):
        for tensor in self.named().values():
            tensor.zero_grad()

    def copy(self):
        return ModelParams.from_arrays(
            self.dimension, self.hidden, {name: t.values.copy() for name, t in self.named().items()}
        )
