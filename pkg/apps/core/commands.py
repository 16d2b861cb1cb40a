"""
Base class for the toolkit's management commands.
File: apps/core/commands.py

Subclasses implement run(**options). Toolkit errors and unreadable files
become a CommandError with status 1; bad arguments are rejected by the
argument parser with status 2 before run() is reached.
"""

import logging

from django.core.management.base import BaseCommand, CommandError

from apps.core.exceptions import TreeAutoencoderError

logger = logging.getLogger(__name__)


class ToolkitCommand(BaseCommand):
    requires_system_checks = []

    def run(self, **options):
        raise NotImplementedError('subclasses of ToolkitCommand must provide a run() method')

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except TreeAutoencoderError as e:
            logger.debug('%s failed', self.__class__.__module__, exc_info=True)
            raise CommandError(str(e), returncode=1) from e
        except OSError as e:
            location = f'{e.filename}: ' if e.filename else ''
            raise CommandError(f'{location}{e.strerror or e}', returncode=1) from e

    def usage_error(self, message):
        """Print the command's usage; returns the status-2 CommandError to raise."""
        subcommand = self.__class__.__module__.rsplit('.', 1)[-1]
        self.stderr.write(self.create_parser('manage.py', subcommand).format_usage().rstrip())
        return CommandError(message, returncode=2)

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))

    def warning(self, message):
        self.stderr.write(self.style.WARNING(message))
