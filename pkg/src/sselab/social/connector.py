"""Fetch raw profile documents from provider plugins and normalize them.

A provider plugin's entry is invoked as ``<entry> fetch --grant <grant>``;
it prints a JSON document to stdout and exits 0. Exit code 2 means the grant
was rejected. The document shape is provider-specific; ``normalize`` maps it
onto the uniform ProfileData record."""

from __future__ import annotations

import json
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping
from urllib.parse import urlsplit

from sselab import errors
from sselab.model import PluginManifest

FETCH_TIMEOUT_S = 15.0


@dataclass(frozen=True)
class ProfileData:
    """Normalized profile record; every field may be empty."""

    display_name: str = ""
    avatar_url: str = ""
    interests: tuple[str, ...] = ()
    links: tuple[tuple[str, str], ...] = ()
    source: str = ""
    fetched_at: float = 0.0

    def to_wire(self) -> dict:
        return {
            "display_name": self.display_name,
            "avatar_url": self.avatar_url,
            "interests": list(self.interests),
            "links": [{"label": label, "url": url}
                      for label, url in self.links],
            "source": self.source,
            "fetched_at": self.fetched_at,
        }

    @classmethod
    def from_wire(cls, doc: Mapping[str, Any]) -> "ProfileData":
        return normalize(doc, now=float(doc.get("fetched_at") or 0.0))


def _absolute_or_empty(url: Any) -> str:
    if not isinstance(url, str):
        return ""
    split = urlsplit(url)
    if split.scheme in ("http", "https") and split.netloc:
        return url
    return ""


def _text(value: Any) -> str:
    return value if isinstance(value, str) else ""


def normalize(doc: Mapping[str, Any], source: str = "",
              now: float | None = None) -> ProfileData:
    """Map a raw provider document onto ProfileData.

    name -> display_name, avatar -> avatar_url, the first present of
    interests/tags/hobbies -> interests (deduplicated, order kept), link
    entries -> (label, url) pairs. Missing fields become empty and anything
    else is dropped. URLs that are not absolute http(s) become empty.
    Normalizing an already-normalized document is a no-op, which lets stored
    profiles round-trip.
    """
    display_name = _text(doc.get("name")) or _text(doc.get("display_name"))
    avatar_url = _absolute_or_empty(doc.get("avatar") or doc.get("avatar_url"))

    interests: tuple[str, ...] = ()
    for key in ("interests", "tags", "hobbies"):
        raw = doc.get(key)
        if isinstance(raw, list):
            seen: list[str] = []
            for item in raw:
                if isinstance(item, str) and item and item not in seen:
                    seen.append(item)
            interests = tuple(seen)
            break

    links: list[tuple[str, str]] = []
    raw_links = doc.get("links")
    if isinstance(raw_links, list):
        for entry in raw_links:
            if isinstance(entry, Mapping):
                links.append((_text(entry.get("label")),
                              _absolute_or_empty(entry.get("url"))))
            elif isinstance(entry, (list, tuple)) and len(entry) == 2:
                links.append((_text(entry[0]), _absolute_or_empty(entry[1])))

    return ProfileData(
        display_name=display_name,
        avatar_url=avatar_url,
        interests=interests,
        links=tuple(links),
        source=source or _text(doc.get("source")),
        fetched_at=time.time() if now is None else now,
    )


def merge_profiles(current: ProfileData, fetched: ProfileData) -> ProfileData:
    """Imported fields overwrite stored ones, but never with emptiness."""
    return ProfileData(
        display_name=fetched.display_name or current.display_name,
        avatar_url=fetched.avatar_url or current.avatar_url,
        interests=fetched.interests or current.interests,
        links=fetched.links or current.links,
        source=fetched.source or current.source,
        fetched_at=fetched.fetched_at or current.fetched_at,
    )


def fetch_profile(manifest: PluginManifest, plugin_dir: Path, grant: str,
                  timeout_s: float = FETCH_TIMEOUT_S) -> dict:
    """Run the provider's fetch action and return its raw document."""
    if not grant:
        raise errors.GrantRejected("empty grant")
    entry = plugin_dir / manifest.entry
    try:
        proc = subprocess.run(
            [str(entry), "fetch", "--grant", grant],
            cwd=str(plugin_dir), capture_output=True, timeout=timeout_s)
    except OSError as exc:
        raise errors.ProviderFailed(f"could not start provider: {exc}")
    except subprocess.TimeoutExpired:
        raise errors.ProviderFailed(
            f"provider did not answer within {timeout_s}s")
    if proc.returncode == 2:
        raise errors.GrantRejected(
            proc.stderr.decode("utf-8", "replace").strip()
            or "provider rejected the grant")
    if proc.returncode != 0:
        raise errors.ProviderFailed(
            f"provider exited {proc.returncode}: "
            + proc.stderr.decode("utf-8", "replace").strip())
    try:
        doc = json.loads(proc.stdout.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise errors.Malformed(f"provider output is not JSON: {exc}")
    if not isinstance(doc, dict):
        raise errors.Malformed("provider output is not a JSON object")
    return doc
