"""
Versioned binary checkpoint container.
File: apps/tree_autoencoder/checkpoint.py

Layout:
    b"TAE" + ASCII version digit      (b"TAE1")
    header length                     8 bytes, little-endian unsigned
    header                            UTF-8 JSON, sorted keys, compact
    payload                           '<f8' values of every tensor, in header order

The header holds the training config, the tensor directory (name, shape),
epoch counter, temperature, generator state and loss history, so a run can
be resumed exactly.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from django.conf import settings

from apps.core.exceptions import CheckpointError, ConfigurationError, ShapeError
from apps.corpus.serializers import first_error
from apps.tree_autoencoder.params import PARAMETER_ORDER, ModelParams, parameter_shapes
from apps.tree_autoencoder.serializers import CheckpointStateSerializer
from apps.tree_autoencoder.trainer import EpochRecord, TrainConfig

logger = logging.getLogger(__name__)

_LENGTH = struct.Struct('<Q')


@dataclass
class Checkpoint:
    config: TrainConfig
    params: ModelParams
    epoch: int = 0
    temperature: float = 1.0
    rng_state: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    @classmethod
    def from_state(cls, state):
        """Snapshot of a TrainingState (parameters copied)."""
        return cls(
            config=state.config,
            params=state.params.copy(),
            epoch=state.epoch,
            temperature=state.temperature,
            rng_state=state.rng.bit_generator.state,
            history=list(state.history),
        )


def _magic():
    return settings.CHECKPOINT_MAGIC + str(settings.CHECKPOINT_VERSION).encode('ascii')


def to_bytes(checkpoint):
    named = checkpoint.params.named()
    header = {
        'config': checkpoint.config.to_dict(),
        'tensors': [{'name': name, 'shape': list(named[name].shape)} for name in PARAMETER_ORDER],
        'epoch': checkpoint.epoch,
        'temperature': checkpoint.temperature,
        'rng_state': checkpoint.rng_state,
        'history': [[r.epoch, r.phase, r.mean_loss] for r in checkpoint.history],
    }
    encoded = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    payload = b''.join(named[name].values.astype('<f8').tobytes() for name in PARAMETER_ORDER)
    return _magic() + _LENGTH.pack(len(encoded)) + encoded + payload


def from_bytes(data, source='checkpoint'):
    magic = settings.CHECKPOINT_MAGIC
    prefix = len(magic) + 1
    if len(data) < prefix + _LENGTH.size:
        raise CheckpointError(f'{source}: truncated file ({len(data)} bytes)')
    if data[:len(magic)] != magic:
        raise CheckpointError(f'{source}: not a checkpoint (bad magic bytes)')
    version = data[len(magic):prefix]
    if version != str(settings.CHECKPOINT_VERSION).encode('ascii'):
        raise CheckpointError(
            f'{source}: unsupported format version {version!r}, expected {settings.CHECKPOINT_VERSION}'
        )

    (length,) = _LENGTH.unpack_from(data, prefix)
    start = prefix + _LENGTH.size
    if len(data) < start + length:
        raise CheckpointError(f'{source}: truncated header')
    try:
        header = json.loads(data[start:start + length].decode('utf-8'))
        config = TrainConfig(**header['config'])
        directory = [(entry['name'], tuple(entry['shape'])) for entry in header['tensors']]
        state = CheckpointStateSerializer(data=header)
        state_is_valid = state.is_valid()
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise CheckpointError(f'{source}: unreadable header ({e})') from e
    except ConfigurationError as e:
        raise CheckpointError(f'{source}: {e}') from e
    if not state_is_valid:
        raise CheckpointError(f'{source}: invalid header ({first_error(state.errors)})')

    expected = parameter_shapes(config.dimension, config.hidden)
    if [name for name, _ in directory] != list(PARAMETER_ORDER):
        raise CheckpointError(f'{source}: tensor directory {[name for name, _ in directory]} does not match the model')
    for name, shape in directory:
        if shape != expected[name]:
            raise CheckpointError(
                f'{source}: tensor {name} has shape {shape}, config d={config.dimension}, '
                f'H={config.hidden} needs {expected[name]}'
            )

    offset = start + length
    arrays = {}
    for name, shape in directory:
        count = int(np.prod(shape))
        end = offset + 8 * count
        if len(data) < end:
            raise CheckpointError(f'{source}: truncated payload in tensor {name}')
        arrays[name] = np.frombuffer(data, dtype='<f8', count=count, offset=offset).reshape(shape).astype(np.float64)
        offset = end
    if offset != len(data):
        raise CheckpointError(f'{source}: {len(data) - offset} trailing bytes after the payload')

    try:
        params = ModelParams.from_arrays(config.dimension, config.hidden, arrays)
    except ShapeError as e:
        raise CheckpointError(f'{source}: {e}') from e
    saved = state.validated_data
    return Checkpoint(
        config=config,
        params=params,
        epoch=saved['epoch'],
        temperature=saved['temperature'],
        rng_state=saved['rng_state'],
        history=[EpochRecord(epoch, phase, loss) for epoch, phase, loss in saved['history']],
    )


def save_checkpoint(path, checkpoint):
    path = Path(path)
    data = to_bytes(checkpoint)
    path.write_bytes(data)
    logger.info('Saved checkpoint at epoch %d to %s (%d bytes)', checkpoint.epoch, path, len(data))
    return path


def load_checkpoint(path):
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f'{path}: {e.strerror}') from e
    return from_bytes(data, source=str(path))
