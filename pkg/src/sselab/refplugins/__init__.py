"""Reference plugins shipped in-repo, one source directory per plugin.

``line-sort`` and ``word-count`` are deterministic headless tools,
``notes`` is a provisionable per-project web service and ``mock-social``
is a profile provider backed by JSON fixtures. ``archive(name)`` packs a
directory into an installable plugin package; the manifest entry is
always marked executable regardless of checkout permissions.
"""

from __future__ import annotations

import json
from pathlib import Path

from sselab.model import build_archive

_ROOT = Path(__file__).parent

PLUGIN_NAMES = ("line-sort", "word-count", "notes", "mock-social")


def plugin_dir(name: str) -> Path:
    if name not in PLUGIN_NAMES:
        raise KeyError(f"unknown reference plugin: {name!r}")
    return _ROOT / name


def archive(name: str) -> bytes:
    """Pack a reference plugin directory into a plugin package archive."""
    root = plugin_dir(name)
    files: dict[str, bytes] = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            files[path.relative_to(root).as_posix()] = path.read_bytes()
    entry = json.loads(files["manifest.json"])["entry"]
    return build_archive(files, executable={entry})
