"""Plugin package archives: gzip-compressed tar with manifest.json at the root."""

from __future__ import annotations

import gzip
import hashlib
import io
import tarfile
from pathlib import Path

from sselab import errors
from sselab.model.manifest import parse_manifest
from sselab.model.types import PluginManifest, PluginPackage


def _clean_member_name(name: str) -> str:
    return name[2:] if name.startswith("./") else name


def _reject_unsafe(name: str) -> None:
    if name.startswith("/") or "\\" in name:
        raise errors.PathTraversal(f"archive member has absolute or unsafe path: {name!r}")
    if ".." in name.split("/"):
        raise errors.PathTraversal(f"archive member path escapes the root: {name!r}")


def open_package(archive: bytes) -> PluginPackage:
    """Parse a plugin archive: listing, root manifest, entry check, checksum.

    Rejects any member with an absolute path or a ``..`` segment, and any
    link member (symlink targets are not validated, so links are banned).
    """
    try:
        tar = tarfile.open(fileobj=io.BytesIO(archive), mode="r:gz")
    except (tarfile.TarError, EOFError, OSError, gzip.BadGzipFile) as exc:
        raise errors.NotAnArchive(f"not a gzip-compressed tar archive: {exc}") from exc

    listing: list[str] = []
    manifest_bytes: bytes | None = None
    with tar:
        for member in tar.getmembers():
            name = _clean_member_name(member.name)
            if not name or name == ".":
                continue
            _reject_unsafe(name)
            if member.issym() or member.islnk():
                raise errors.PathTraversal(
                    f"archive member {name!r} is a link; links are not allowed")
            if member.isdir():
                continue
            if not member.isfile():
                raise errors.Unpackable(f"archive member {name!r} has unsupported type")
            listing.append(name)
            if name == "manifest.json":
                fileobj = tar.extractfile(member)
                manifest_bytes = fileobj.read() if fileobj else b""

    if manifest_bytes is None:
        raise errors.NoManifest("archive has no manifest.json at its root")

    manifest = parse_manifest(manifest_bytes)
    if manifest.entry not in listing:
        raise errors.EntryMissing(
            f"entry {manifest.entry!r} not present in the archive")

    checksum = hashlib.sha256(archive).hexdigest()
    manifest = PluginManifest(**{**manifest.__dict__, "checksum": checksum})
    return PluginPackage(
        manifest=manifest,
        archive_bytes=archive,
        file_listing=tuple(sorted(listing)),
    )


def extract_package(package: PluginPackage, dest: Path) -> None:
    """Unpack an already-validated package's regular files under dest."""
    with tarfile.open(fileobj=io.BytesIO(package.archive_bytes), mode="r:gz") as tar:
        for member in tar.getmembers():
            name = _clean_member_name(member.name)
            if name not in package.file_listing:
                continue
            target = dest / name
            target.parent.mkdir(parents=True, exist_ok=True)
            fileobj = tar.extractfile(member)
            target.write_bytes(fileobj.read() if fileobj else b"")
    entry = dest / package.manifest.entry
    entry.chmod(entry.stat().st_mode | 0o755)


def build_archive(files: dict[str, bytes], executable: set[str] | None = None) -> bytes:
    """Build a package archive from a path-to-bytes mapping (fixtures, tests)."""
    executable = executable or set()
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:gz") as tar:
        for name in sorted(files):
            data = files[name]
            info = tarfile.TarInfo(name=name)
            info.size = len(data)
            info.mode = 0o755 if name in executable else 0o644
            info.mtime = 0
            tar.addfile(info, io.BytesIO(data))
    return buf.getvalue()


def archive_from_dir(root: Path) -> bytes:
    """Pack a plugin source directory (used for the in-repo reference plugins)."""
    files: dict[str, bytes] = {}
    executable: set[str] = set()
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        rel = path.relative_to(root).as_posix()
        files[rel] = path.read_bytes()
        if path.stat().st_mode & 0o100:
            executable.add(rel)
    return build_archive(files, executable)
