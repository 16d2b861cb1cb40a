"""
File helpers shared by the management commands.
File: apps/core/utils.py
"""

from pathlib import Path

from cryptography.hazmat.primitives import hashes

from apps.core.exceptions import DataFormatError

CHUNK_SIZE = 1 << 16


def file_digest(path):
    """
    SHA-256 of a file's bytes.

    Returns:
        str: "sha256:<hex digest>"
    """
    digest = hashes.Hash(hashes.SHA256())
    try:
        with open(path, 'rb') as f:
            for chunk in iter(lambda: f.read(CHUNK_SIZE), b''):
                digest.update(chunk)
    except OSError as e:
        raise DataFormatError(e.strerror or str(e), path=path) from e
    return 'sha256:' + digest.finalize().hex()


def read_text_lines(path):
    """
    Yield (line_no, text) for each line of a UTF-8 file.

    Lines are decoded one at a time so an undecodable byte is reported with
    its line number instead of failing the whole read.
    """
    with open(path, 'rb') as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                yield line_no, raw.decode('utf-8')
            except UnicodeDecodeError as e:
                raise DataFormatError(
                    f'Invalid UTF-8 at byte {e.start}: {raw[e.start:e.start + 1]!r}', path, line_no
                ) from e


def read_text(path):
    """Whole file as UTF-8 text; undecodable bytes are a DataFormatError."""
    return ''.join(text for _, text in read_text_lines(path))


def ensure_directory(path):
    path = Path(path)
    if path.exists() and not path.is_dir():
        raise DataFormatError('output path exists and is not a directory', path=path)
    path.mkdir(parents=True, exist_ok=True)
    return path
