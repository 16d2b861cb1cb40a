"""
Run manifest written next to every trained model.
File: apps/tree_autoencoder/manifest.py
"""

import json
import logging
from pathlib import Path

from django.conf import settings
from rest_framework.renderers import JSONRenderer

from apps.core.exceptions import DataFormatError
from apps.core.serializers import RunManifestSerializer
from apps.core.utils import file_digest, read_text

logger = logging.getLogger(__name__)


def describe_input(path):
    path = Path(path).resolve()
    return {'path': str(path), 'digest': file_digest(path)}


def build_manifest(config, inputs, started_at, finished_at=None, resumed_from=None):
    """
    Validated manifest data.

    Args:
        config: TrainConfig of the run.
        inputs: {role: path} of every input file, e.g. corpus and embeddings.
        resumed_from: checkpoint path when the run continues another one.
    """
    data = {
        'toolkit_version': settings.TOOLKIT_VERSION,
        'seed': config.seed,
        'config': config.to_dict(),
        'inputs': {role: describe_input(path) for role, path in inputs.items()},
        'resumed_from': describe_input(resumed_from) if resumed_from else None,
        'started_at': started_at,
        'finished_at': finished_at,
    }
    serializer = RunManifestSerializer(data=data)
    if not serializer.is_valid():
        raise DataFormatError(f'Invalid run manifest: {serializer.errors}')
    return serializer.data


def write_manifest(path, manifest):
    Path(path).write_bytes(JSONRenderer().render(manifest, renderer_context={'indent': 2}))
    logger.info('Wrote run manifest to %s', path)


def read_manifest(path):
    try:
        data = json.loads(read_text(path))
    except json.JSONDecodeError as e:
        raise DataFormatError(f'Malformed manifest: {e.msg}', path, e.lineno) from e
    serializer = RunManifestSerializer(data=data)
    if not serializer.is_valid():
        raise DataFormatError(f'Invalid run manifest: {serializer.errors}', path)
    return serializer.validated_data


def verify_input(manifest, role):
    """Path of a recorded input after checking the file still has its recorded digest."""
    entry = manifest['inputs'].get(role)
    if entry is None:
        raise DataFormatError(f'Manifest records no {role} input.')
    if file_digest(entry['path']) != entry['digest']:
        raise DataFormatError(f'{role} file changed since training', path=entry['path'])
    return entry['path']


def complete_manifest(manifest, finished_at):
    """The same manifest with the finish time filled in."""
    serializer = RunManifestSerializer(data={**manifest, 'finished_at': finished_at})
    if not serializer.is_valid():
        raise DataFormatError(f'Invalid run manifest: {serializer.errors}')
    return serializer.data
