"""Command-line clients: ``sselab`` for users, ``sselab-admin`` for scripts."""
