"""
Serializers for training configuration.
File: apps/tree_autoencoder/serializers.py

TrainConfigSerializer checks a complete set of training options, whether
they come from the command line, the settings defaults or a checkpoint
header. CheckpointStateSerializer checks the rest of a checkpoint header.
"""

import math

import numpy as np
from rest_framework import serializers

from apps.tree_autoencoder.models import Phase


class TrainConfigSerializer(serializers.Serializer):
    dimension = serializers.IntegerField(min_value=1)
    hidden = serializers.IntegerField(min_value=1)
    epochs = serializers.IntegerField(min_value=0)
    phase_length = serializers.IntegerField(min_value=1)
    learning_rate = serializers.FloatField()
    temperature_start = serializers.FloatField()
    temperature_min = serializers.FloatField()
    temperature_decay = serializers.FloatField()
    seed = serializers.IntegerField(min_value=0)
    shuffle = serializers.BooleanField()
    init_range = serializers.FloatField()

    def _positive(self, value, name):
        if not value > 0 or value == float('inf'):
            raise serializers.ValidationError(f'{name} must be a positive finite number.')
        return value

    def validate_learning_rate(self, value):
        return self._positive(value, 'Learning rate')

    def validate_temperature_start(self, value):
        return self._positive(value, 'Start temperature')

    def validate_temperature_min(self, value):
        return self._positive(value, 'Minimum temperature')

    def validate_init_range(self, value):
        return self._positive(value, 'Initialization range')

    def validate_temperature_decay(self, value):
        """Multiplicative annealing factor, in (0, 1]."""
        if not 0 < value <= 1:
            raise serializers.ValidationError('Temperature decay must be in (0, 1].')
        return value

    def validate(self, attrs):
        if attrs['temperature_min'] > attrs['temperature_start']:
            raise serializers.ValidationError(
                {'temperature_min': 'Minimum temperature must not exceed the start temperature.'}
            )
        return attrs


class CheckpointStateSerializer(serializers.Serializer):
    """
    The resumable part of a checkpoint header: epoch counter, temperature,
    generator state and loss history.

    history rows are [epoch, phase, mean_loss].
    """
    epoch = serializers.IntegerField(min_value=0)
    temperature = serializers.FloatField()
    rng_state = serializers.DictField()
    history = serializers.ListField(child=serializers.ListField())

    def validate_temperature(self, value):
        if not 0 < value < float('inf'):
            raise serializers.ValidationError('Temperature must be a positive finite number.')
        return value

    def validate_rng_state(self, value):
        generator = np.random.Generator(np.random.PCG64())
        try:
            generator.bit_generator.state = value
        except (ValueError, TypeError, KeyError) as e:
            raise serializers.ValidationError(f'Not a PCG64 generator state ({e}).')
        return value

    def validate_history(self, value):
        rows = []
        for index, row in enumerate(value):
            if len(row) != 3:
                raise serializers.ValidationError(f'Row {index} must be [epoch, phase, mean_loss].')
            epoch, phase, loss = row
            if isinstance(epoch, bool) or not isinstance(epoch, int) or epoch < 0:
                raise serializers.ValidationError(f'Row {index}: epoch must be a non-negative integer.')
            if phase not in Phase.values:
                raise serializers.ValidationError(f'Row {index}: unknown phase {phase!r}.')
            if isinstance(loss, bool) or not isinstance(loss, (int, float)) or not math.isfinite(loss):
                raise serializers.ValidationError(f'Row {index}: mean loss must be a finite number.')
            rows.append((epoch, phase, float(loss)))
        return rows
