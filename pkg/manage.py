#!/usr/bin/env python
"""Django's command-line utility for gaussmt.

Subcommands may be spelled with hyphens (``rd-curve``) or underscores
(``rd_curve``); both run the same management command.
"""
import os
import sys


def main():
    """Run gaussmt commands."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'gaussmt.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    argv = list(sys.argv)
    if len(argv) > 1 and not argv[1].startswith('-'):
        argv[1] = argv[1].replace('-', '_')
    execute_from_command_line(argv)


if __name__ == '__main__':
    main()
