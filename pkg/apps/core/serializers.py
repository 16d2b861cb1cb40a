"""
Serializers for run manifests.
File: apps/core/serializers.py

A manifest is written into every training output directory before the first
epoch runs. Together with the input files it names, it is enough to repeat
the run bit for bit.

Reference: DRF Serializers - https://www.django-rest-framework.org/api-guide/serializers/
"""

import re

from rest_framework import serializers

DIGEST_PATTERN = re.compile(r'^sha256:[0-9a-f]{64}$')


class InputFileSerializer(serializers.Serializer):
    """One input file and the digest of its contents."""
    path = serializers.CharField()
    digest = serializers.CharField()

    def validate_digest(self, value):
        if not DIGEST_PATTERN.match(value):
            raise serializers.ValidationError('Digest must look like "sha256:<64 hex digits>".')
        return value


class RunManifestSerializer(serializers.Serializer):
    """
    Resolved configuration, input digests, seed, toolkit version, timestamps.
    finished_at stays null until the run completes.
    """
    toolkit_version = serializers.CharField()
    seed = serializers.IntegerField(min_value=0)
    config = serializers.DictField()
    inputs = serializers.DictField(child=InputFileSerializer())
    resumed_from = InputFileSerializer(required=False, allow_null=True, default=None)
    started_at = serializers.DateTimeField()
    finished_at = serializers.DateTimeField(required=False, allow_null=True, default=None)

    def validate(self, attrs):
        if attrs['config'].get('seed') != attrs['seed']:
            raise serializers.ValidationError({'seed': 'Seed must match the resolved config.'})
        finished = attrs.get('finished_at')
        if finished is not None and finished < attrs['started_at']:
            raise serializers.ValidationError({'finished_at': 'Run cannot finish before it starts.'})
        return attrs
