"""Admin client for scripted portal administration.

Deliberately never reads from the terminal: the token comes from
``--token`` or SSELAB_ADMIN_TOKEN and failures map to distinct exit
codes so release scripts can branch on them.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx

from sselab import errors, wire
from sselab.cli import config as cfg

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 3
EXIT_DUPLICATE = 4
EXIT_UNAUTHORIZED = 5

REQUEST_TIMEOUT_S = 120.0


def exit_code_for(exc: errors.ApiError) -> int:
    if exc.code == "ValidationFailed":
        return EXIT_VALIDATION
    if exc.code in ("DuplicatePlugin", "DuplicateUrl"):
        return EXIT_DUPLICATE
    if exc.code in ("Unauthorized", "BadCredentials", "AccountLocked"):
        return EXIT_UNAUTHORIZED
    return EXIT_ERROR


def emit(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def plugin_install(client: httpx.Client, url: str, headers: dict, archive: str) -> int:
    path = Path(archive)
    if not path.is_file():
        print("no such archive: %s" % archive, file=sys.stderr)
        return EXIT_ERROR
    response = client.post(url + "/api/admin/plugins", content=path.read_bytes(),
                           headers={**headers, "Content-Type": "application/gzip"})
    wire.raise_for_api_error(response)
    body = response.json()
    reports = body.get("reconciled", [])
    emit({
        "id": body["plugin"]["id"],
        "version": body["plugin"]["version"],
        "installed_backends": sum(1 for r in reports if r.get("health") == "healthy"),
    })
    return EXIT_OK


def backend_register(client, url, headers, backend_url, category) -> int:
    response = client.post(url + "/api/admin/backends",
                           json={"url": backend_url, "category": category},
                           headers=headers)
    wire.raise_for_api_error(response)
    body = response.json()
    emit({**body["backend"], "reconcile": body["reconcile"]})
    return EXIT_OK


def backend_reconcile(client, url, headers, backend_id) -> int:
    response = client.post(url + "/api/admin/backends/%s/reconcile" % backend_id,
                           headers=headers)
    wire.raise_for_api_error(response)
    emit(response.json())
    return EXIT_OK


def backend_list(client, url, headers) -> int:
    response = client.get(url + "/api/admin/backends", headers=headers)
    wire.raise_for_api_error(response)
    emit(response.json())
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sselab-admin", description="Scripted portal administration.")
    parser.add_argument("--url", default=None, help="front-end URL override")
    parser.add_argument("--token", default=None,
                        help="admin token; defaults to SSELAB_ADMIN_TOKEN")
    sub = parser.add_subparsers(dest="command", required=True)

    plugin = sub.add_parser("plugin", help="plugin catalog management")
    plugin_sub = plugin.add_subparsers(dest="plugin_command", required=True)
    install = plugin_sub.add_parser("install", help="upload a plugin package")
    install.add_argument("archive")

    backend = sub.add_parser("backend", help="back-end management")
    backend_sub = backend.add_subparsers(dest="backend_command", required=True)
    register = backend_sub.add_parser("register", help="register a back-end")
    register.add_argument("backend_url")
    register.add_argument("category", choices=["base", "ostp", "social"])
    reconcile = backend_sub.add_parser("reconcile", help="reconcile a back-end")
    reconcile.add_argument("backend_id")
    backend_sub.add_parser("list", help="list registered back-ends")

    args = parser.parse_args(argv)
    url = cfg.frontend_url(cfg.load_config(), args.url)
    token = args.token or os.environ.get("SSELAB_ADMIN_TOKEN")
    if not token:
        print("admin token required (--token or SSELAB_ADMIN_TOKEN)", file=sys.stderr)
        return EXIT_UNAUTHORIZED
    headers = {"Authorization": "Bearer " + token}

    try:
        with httpx.Client(timeout=REQUEST_TIMEOUT_S) as client:
            if args.command == "plugin":
                return plugin_install(client, url, headers, args.archive)
            if args.backend_command == "register":
                return backend_register(client, url, headers,
                                        args.backend_url, args.category)
            if args.backend_command == "reconcile":
                return backend_reconcile(client, url, headers, args.backend_id)
            return backend_list(client, url, headers)
    except errors.ApiError as exc:
        detail = ""
        if exc.detail is not None:
            detail = "\n" + json.dumps(exc.detail, indent=2, sort_keys=True)
        print("%s: %s%s" % (exc.code, exc.message, detail), file=sys.stderr)
        return exit_code_for(exc)
    except httpx.TransportError as exc:
        print("cannot reach %s: %s" % (url, exc), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
