#!/usr/bin/env python
"""
Command-line entry point.

    python manage.py make_toy_corpus --out data/
    python manage.py train --corpus data/corpus.jsonl --embeddings data/embeddings.txt --out run/
    python manage.py induce --checkpoint run/model.tae --corpus data/corpus.jsonl --out run/trees.tsv
    python manage.py eval --pred run/trees.tsv --gold data/gold.tsv
    python manage.py stats --trees run/trees.tsv

Exit status: 0 on success, 1 on a data or validation error, 2 on a usage error.
"""
import os
import sys

# Arguments Django handles itself instead of dispatching to a command
DJANGO_ENTRY_WORDS = {"help", "version", "--help", "-h", "--version"}


def main(argv=None):
    """Run a subcommand and return its exit status."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings.development")
    try:
        import django
        from django.core.management import execute_from_command_line, get_commands
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    argv = list(argv) if argv is not None else sys.argv

    django.setup()
    if len(argv) < 2:
        sys.stderr.write(__doc__)
        return 2
    if argv[1] not in get_commands() and argv[1] not in DJANGO_ENTRY_WORDS:
        sys.stderr.write(f"Unknown subcommand {argv[1]!r}.\n{__doc__}")
        return 2

    try:
        execute_from_command_line(argv)
    except SystemExit as exit_:
        if exit_.code is None:
            return 0
        return exit_.code if isinstance(exit_.code, int) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
