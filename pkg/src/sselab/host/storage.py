"""On-disk plugin storage with crash-safe installs.

Layout under data_dir:

    plugins/{id}/{version}/   unpacked package (manifest.json, entry, ...)
    meta/{id}@{version}.json  install metadata (archive checksum, timestamp)
    .staging/                 scratch space; wiped on startup

An install unpacks into .staging/ and is moved into place with one atomic
rename, so a host killed mid-install never reports a half-installed plugin:
after restart the rescan sees either the complete version directory or
nothing."""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import threading
import time
import uuid
from pathlib import Path

from sselab import errors
from sselab.model import (
    PluginManifest,
    ServiceCategory,
    extract_package,
    open_package,
    parse_manifest,
)


class PluginStore:
    def __init__(self, data_dir: Path | str, category: ServiceCategory):
        self.data_dir = Path(data_dir)
        self.category = category
        self.plugins_root = self.data_dir / "plugins"
        self.meta_root = self.data_dir / "meta"
        self.staging_root = self.data_dir / ".staging"
        for directory in (self.plugins_root, self.meta_root, self.staging_root):
            directory.mkdir(parents=True, exist_ok=True)
        self._writer_lock = threading.Lock()
        self._snapshot: tuple[PluginManifest, ...] = ()
        self._wipe_staging()
        self._rescan()

    def _wipe_staging(self) -> None:
        for leftover in self.staging_root.iterdir():
            shutil.rmtree(leftover, ignore_errors=True)

    def _rescan(self) -> None:
        """Rebuild the snapshot from the filesystem (startup, recovery)."""
        found: list[PluginManifest] = []
        for manifest_path in sorted(self.plugins_root.glob("*/*/manifest.json")):
            version_dir = manifest_path.parent
            try:
                manifest = parse_manifest(manifest_path.read_bytes())
            except errors.ApiError:
                continue
            if (manifest.id != version_dir.parent.name
                    or manifest.version != version_dir.name):
                continue
            checksum = self._read_meta(manifest.id, manifest.version)
            if checksum:
                manifest = PluginManifest(
                    **{**manifest.__dict__, "checksum": checksum})
            found.append(manifest)
        self._snapshot = tuple(sorted(found, key=lambda m: m.key))

    def _meta_path(self, plugin_id: str, version: str) -> Path:
        return self.meta_root / f"{plugin_id}@{version}.json"

    def _read_meta(self, plugin_id: str, version: str) -> str | None:
        try:
            doc = json.loads(self._meta_path(plugin_id, version).read_text())
            return doc.get("checksum")
        except (OSError, json.JSONDecodeError):
            return None

    # -- reads (lock-free snapshot) -------------------------------------------

    def list_plugins(self) -> tuple[PluginManifest, ...]:
        return self._snapshot

    def installed_keys(self) -> frozenset[tuple[str, str]]:
        return frozenset(m.key for m in self._snapshot)

    def manifest_for(self, plugin_id: str, version: str) -> PluginManifest:
        for manifest in self._snapshot:
            if manifest.key == (plugin_id, version):
                return manifest
        raise errors.NotInstalled(f"{plugin_id}@{version} is not installed")

    def plugin_dir(self, plugin_id: str, version: str) -> Path:
        self.manifest_for(plugin_id, version)
        return self.plugins_root / plugin_id / version

    # -- writes (serialized) -------------------------------------------------

    def install(self, archive: bytes,
                expected_checksum: str | None = None) -> PluginManifest:
        # checksum first: a tampered archive must surface as ChecksumMismatch
        # even when the tampering also broke the compression
        if expected_checksum:
            digest = hashlib.sha256(archive).hexdigest()
            if digest != expected_checksum:
                raise errors.ChecksumMismatch(
                    f"archive checksum {digest} does not match expected "
                    f"{expected_checksum}")
        package = open_package(archive)
        manifest = package.manifest
        if manifest.category != self.category:
            raise errors.CategoryMismatch(
                f"{manifest.id} is a {manifest.category} plugin; this host "
                f"serves {self.category}")
        with self._writer_lock:
            target = self.plugins_root / manifest.id / manifest.version
            if manifest.key in self.installed_keys() or target.exists():
                raise errors.AlreadyInstalled(
                    f"{manifest.id}@{manifest.version} is already installed")
            stage = self.staging_root / uuid.uuid4().hex
            try:
                extract_package(package, stage)
            except OSError as exc:
                shutil.rmtree(stage, ignore_errors=True)
                raise errors.Unpackable(f"could not unpack archive: {exc}")
            meta = {"checksum": manifest.checksum,
                    "installed_at": time.time()}
            meta_tmp = self._meta_path(manifest.id, manifest.version)
            meta_tmp.write_text(json.dumps(meta, sort_keys=True))
            target.parent.mkdir(parents=True, exist_ok=True)
            os.replace(stage, target)
            self._snapshot = tuple(sorted(
                (*self._snapshot, manifest), key=lambda m: m.key))
        return manifest

    def remove(self, plugin_id: str, version: str, busy=None) -> None:
        with self._writer_lock:
            manifest = self.manifest_for(plugin_id, version)
            if busy is not None and busy(plugin_id, version):
                raise errors.InUse(
                    f"{plugin_id}@{version} is in use; retry later")
            target = self.plugins_root / plugin_id / version
            graveyard = self.staging_root / f"rm-{uuid.uuid4().hex}"
            os.replace(target, graveyard)
            shutil.rmtree(graveyard, ignore_errors=True)
            self._meta_path(plugin_id, version).unlink(missing_ok=True)
            try:
                (self.plugins_root / plugin_id).rmdir()
            except OSError:
                pass  # other versions remain
            self._snapshot = tuple(
                m for m in self._snapshot if m.key != manifest.key)
