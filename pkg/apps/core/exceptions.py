"""
Exception hierarchy shared by every app.
File: apps/core/exceptions.py

Library code raises these; management commands turn them into
CommandError so the process exits with status 1.
"""


class TreeAutoencoderError(Exception):
    """Root of all toolkit errors."""


class ConfigurationError(TreeAutoencoderError, ValueError):
    """Invalid training configuration."""

    def __init__(self, errors):
        self.errors = errors
        if isinstance(errors, dict):
            details = '; '.join(f'{field}: {", ".join(map(str, msgs))}' for field, msgs in errors.items())
        else:
            details = str(errors)
        super().__init__(f'Invalid configuration: {details}')


class ShapeError(TreeAutoencoderError, ValueError):
    """Tensor shapes do not fit the operation."""

    def __init__(self, op, expected, actual):
        self.op = op
        self.expected = expected
        self.actual = actual
        super().__init__(f'{op}: expected {expected}, got {actual}')


class GraphError(TreeAutoencoderError):
    """Misuse of the compute graph (non-scalar loss, foreign tensor, ...)."""


class DataFormatError(TreeAutoencoderError, ValueError):
    """A data file is malformed. Carries the file and 1-based line number when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        location = ''
        if path is not None:
            location = f'{path}'
        if line is not None:
            location = f'{location}:{line}' if location else f'line {line}'
        super().__init__(f'{location}: {message}' if location else message)


class TreeError(TreeAutoencoderError, ValueError):
    """Invalid tree, merge trace or bracketed string."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f'{message} (at {position})'
        super().__init__(message)


class SelectionError(TreeAutoencoderError, ValueError):
    """Invalid arguments to the discrete structure selector."""


class NonFiniteLossError(TreeAutoencoderError):
    """Training produced NaN or Inf."""

    def __init__(self, doc_id, epoch, value):
        self.doc_id = doc_id
        self.epoch = epoch
        self.value = value
        super().__init__(f'Non-finite loss {value} on document {doc_id!r} in epoch {epoch}')


class CheckpointError(TreeAutoencoderError):
    """A checkpoint file cannot be read back."""
