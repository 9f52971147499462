"""Shared test harness: manifest builders, plugin archives, a portal stack."""

from __future__ import annotations

import json

import httpx

from sselab import wire
from sselab.frontend.service import FrontendHandler, FrontendService
from sselab.host.service import BackendHost, HostHandler
from sselab.model import ServiceCategory, build_archive

ADMIN = ("root", "root-pw")
USER = ("ada", "ada-pw")


class Portal:
    """A live front-end plus any number of in-process back-end hosts."""

    def __init__(self, tmp_path):
        self.data_dir = tmp_path / "frontend"
        self.service = FrontendService(self.data_dir)
        self.server, self.thread = wire.start_server(self.service, FrontendHandler)
        self.base_url = "http://127.0.0.1:%d" % self.server.port
        self.service.registry.add_user(ADMIN[0], ADMIN[1], is_admin=True)
        self.service.registry.add_user(USER[0], USER[1])
        self.client = httpx.Client(base_url=self.base_url, timeout=30.0)
        self.backends = []

    def login(self, username, password) -> dict:
        response = self.client.post("/api/auth/login",
                                    json={"username": username, "password": password})
        wire.raise_for_api_error(response)
        # tests authenticate via explicit headers; do not let the session
        # cookie from the login response leak into later requests
        self.client.cookies.clear()
        return response.json()

    def auth(self, username=None, password=None) -> dict:
        creds = (username, password) if username else ADMIN
        return {"Authorization": "Bearer " + self.login(*creds)["token"]}

    def spawn_backend(self, tmp_path, category, name):
        host = BackendHost(tmp_path / name, ServiceCategory.parse(category))
        server, _ = wire.start_server(host, HostHandler)
        self.backends.append((host, server))
        return "http://127.0.0.1:%d" % server.port

    def register(self, url, category, headers) -> dict:
        response = self.client.post("/api/admin/backends",
                                    json={"url": url, "category": category},
                                    headers=headers)
        wire.raise_for_api_error(response)
        return response.json()

    def upload(self, payload: bytes, headers) -> httpx.Response:
        return self.client.post("/api/admin/plugins", content=payload,
                                headers={**headers, "Content-Type": "application/gzip"})

    def close(self):
        self.client.close()
        self.server.shutdown()
        for host, server in self.backends:
            server.shutdown()
            host.shutdown()
        self.service.shutdown()


def manifest_doc(**overrides) -> dict:
    """A well-formed ostp manifest document; override fields per test."""
    doc = {
        "id": "line-sort",
        "version": "1.0.0",
        "category": "ostp",
        "display_name": "Line sort",
        "description": "Sorts the lines of each input file.",
        "entry": "bin/run",
        "params": [
            {"name": "order", "kind": "enum", "required": False,
             "default": "asc", "choices": ["asc", "desc"]},
            {"name": "unique", "kind": "bool", "required": False, "default": False},
        ],
        "properties": {
            "headless": True,
            "runtime_deps": [],
            "supports_sso": False,
            "access_control": "none",
        },
    }
    doc.update(overrides)
    return doc


def base_manifest_doc(**overrides) -> dict:
    doc = manifest_doc(
        id="notes", category="base", params=[],
        properties={"headless": True, "runtime_deps": [],
                    "supports_sso": True, "access_control": "per-project"},
    )
    doc.update(overrides)
    return doc


def social_manifest_doc(**overrides) -> dict:
    doc = manifest_doc(
        id="mock-social", category="social",
        params=[{"name": "grant", "kind": "string", "required": True}],
        properties={"headless": True, "runtime_deps": [],
                    "supports_sso": False, "access_control": "per-user"},
    )
    doc.update(overrides)
    return doc


def manifest_bytes(doc: dict) -> bytes:
    return json.dumps(doc).encode("utf-8")


def package_bytes(doc: dict, files: dict[str, bytes] | None = None,
                  executable: set[str] | None = None) -> bytes:
    """An archive holding the manifest plus the given files (entry by default)."""
    members = {"manifest.json": manifest_bytes(doc)}
    if files is None:
        files = {doc["entry"]: b"#!/bin/sh\nexit 0\n"}
    members.update(files)
    if executable is None:
        executable = {doc["entry"]} & set(members)
    return build_archive(members, executable)
