"""
Loss history table for offline plotting.
File: apps/tree_autoencoder/reports.py
"""

from apps.core.exceptions import DataFormatError
from apps.tree_autoencoder.models import Phase
from apps.tree_autoencoder.trainer import EpochRecord

LOSS_TABLE_HEADER = 'epoch,phase,mean_loss'


def emit_loss_plot_data(history):
    """Header plus one 'epoch,phase,mean_loss' row per epoch (12 decimals)."""
    if not history:
        raise ValueError('Loss history is empty; nothing to emit.')
    rows = [LOSS_TABLE_HEADER]
    rows.extend(f'{record.epoch},{Phase(record.phase).value},{record.mean_loss:.12f}' for record in history)
    return '\n'.join(rows) + '\n'


def parse_loss_table(text, path=None):
    lines = text.splitlines()
    if not lines or lines[0] != LOSS_TABLE_HEADER:
        raise DataFormatError(f'expected header {LOSS_TABLE_HEADER!r}', path=path, line=1)
    history = []
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split(',')
        try:
            epoch, phase, loss = parts
            history.append(EpochRecord(int(epoch), Phase(phase).value, float(loss)))
        except ValueError as e:
            raise DataFormatError(f'bad row {line!r}', path=path, line=number) from e
    return history
