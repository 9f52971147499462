"""HTTP plumbing shared by the front-end and the back-end hosts.

Thin layer over the stdlib threading HTTP server: regex routing, JSON
helpers, error mapping, and a strict binary-safe multipart/form-data parser
(job submissions carry arbitrary file bytes, so the parser never performs
newline normalization).
"""

from __future__ import annotations

import json
import logging
import re
import threading
import urllib.parse
from dataclasses import dataclass
from email.message import Message
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from sselab import errors

log = logging.getLogger("sselab.wire")

SECRET_HEADER = "X-SSELab-Secret"
TOKEN_HEADER = "X-SSELab-Token"
CHECKSUM_HEADER = "X-SSELab-Checksum"
SERVICE_ID_HEADER = "X-SSELab-Service-Id"
SERVICE_VERSION_HEADER = "X-SSELab-Service-Version"
TIMEOUT_HEADER = "X-SSELab-Timeout"
USER_HEADER = "X-SSELab-User"
ROLE_HEADER = "X-SSELab-Role"

MAX_BODY_BYTES = 256 * 1024 * 1024

# Hop-by-hop headers are never forwarded by the reverse proxies.
HOP_HEADERS = {
    "connection", "keep-alive", "proxy-authenticate", "proxy-authorization",
    "te", "trailers", "transfer-encoding", "upgrade", "host", "content-length",
}


@dataclass(frozen=True)
class Part:
    """One multipart/form-data part."""

    name: str
    filename: str | None
    content_type: str | None
    data: bytes


def _disposition_params(value: str) -> tuple[str | None, str | None]:
    msg = Message()
    msg["content-disposition"] = value
    name = msg.get_param("name", header="content-disposition")
    filename = msg.get_param("filename", header="content-disposition")
    return (name if isinstance(name, str) else None,
            filename if isinstance(filename, str) else None)


def parse_multipart(content_type: str | None, body: bytes) -> list[Part]:
    """Parse a multipart/form-data body into parts, binary-safe.

    Raises BadFieldValue for anything that is not well-formed multipart as
    produced by browsers and mainstream HTTP clients.
    """
    msg = Message()
    msg["content-type"] = content_type or ""
    if msg.get_content_type() != "multipart/form-data":
        raise errors.BadFieldValue(
            f"expected multipart/form-data, got {content_type!r}")
    boundary = msg.get_param("boundary", header="content-type")
    if not isinstance(boundary, str) or not boundary:
        raise errors.BadFieldValue("multipart content-type lacks a boundary")

    delimiter = b"\r\n--" + boundary.encode("latin-1")
    chunks = (b"\r\n" + body).split(delimiter)
    parts: list[Part] = []
    closed = False
    for chunk in chunks[1:]:
        if chunk.startswith(b"--"):
            closed = True
            break
        if not chunk.startswith(b"\r\n"):
            raise errors.BadFieldValue("malformed multipart boundary line")
        head, sep, data = chunk[2:].partition(b"\r\n\r\n")
        if not sep:
            raise errors.BadFieldValue("multipart part lacks a header terminator")
        headers: dict[str, str] = {}
        for line in head.split(b"\r\n"):
            if not line:
                continue
            key, colon, value = line.decode("latin-1").partition(":")
            if not colon:
                raise errors.BadFieldValue(f"malformed part header line {line!r}")
            headers[key.strip().lower()] = value.strip()
        name, filename = _disposition_params(headers.get("content-disposition", ""))
        if name is None:
            raise errors.BadFieldValue("multipart part lacks a field name")
        parts.append(Part(name=name, filename=filename,
                          content_type=headers.get("content-type"), data=data))
    if not closed:
        raise errors.BadFieldValue("multipart body lacks a closing boundary")
    return parts


class Route:
    """One (method, path-regex) -> handler-method-name entry."""

    def __init__(self, method: str, pattern: str, handler_name: str):
        self.method = method
        self.pattern = re.compile(pattern)
        self.handler_name = handler_name

    def match(self, method: str, path: str) -> re.Match | None:
        if self.method != "*" and self.method != method:
            return None
        return self.pattern.fullmatch(path)


class ServiceHTTPServer(ThreadingHTTPServer):
    """Threading server carrying the owning service and a request counter."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], handler_cls, service):
        super().__init__(address, handler_cls)
        self.service = service
        self.request_count = 0
        self._count_lock = threading.Lock()

    def count_request(self) -> None:
        with self._count_lock:
            self.request_count += 1

    @property
    def port(self) -> int:
        return self.server_address[1]


class ApiHandler(BaseHTTPRequestHandler):
    """Routing request handler; subclasses define ROUTES and handler methods."""

    protocol_version = "HTTP/1.1"
    server_version = "sselab"
    ROUTES: tuple[Route, ...] = ()

    # populated per request by _dispatch
    route_path: str = ""
    query: dict[str, list[str]]

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_DELETE(self):
        self._dispatch("DELETE")

    def do_PATCH(self):
        self._dispatch("PATCH")

    def do_HEAD(self):
        self._dispatch("HEAD")

    def do_OPTIONS(self):
        self._dispatch("OPTIONS")

    def _dispatch(self, method: str) -> None:
        self.server.count_request()
        raw_path, _, raw_query = self.path.partition("?")
        self.route_path = urllib.parse.unquote(raw_path)
        self.raw_query = raw_query
        self.query = urllib.parse.parse_qs(raw_query)
        self._body: bytes | None = None
        try:
            self.before_route(method)
            for route in self.ROUTES:
                match = route.match(method, self.route_path)
                if match is not None:
                    getattr(self, route.handler_name)(match)
                    self._drain_body()
                    return
            raise errors.NotFound(f"no route for {method} {self.route_path}")
        except errors.ApiError as exc:
            self._drain_body()
            self.send_json(exc.status, exc.to_wire())
        except (BrokenPipeError, ConnectionResetError):
            self.close_connection = True
        except Exception as exc:  # pragma: no cover - defensive
            log.exception("unhandled error for %s %s", method, self.route_path)
            self._drain_body()
            self.send_json(500, {"error": "InternalError", "message": str(exc)})

    def before_route(self, method: str) -> None:
        """Hook run before routing; subclasses use it for authentication."""

    # -- request helpers ---------------------------------------------------

    def read_body(self) -> bytes:
        if self._body is None:
            length = int(self.headers.get("Content-Length") or 0)
            if length > MAX_BODY_BYTES:
                raise errors.TooLarge("request body too large")
            remaining = length
            chunks = []
            while remaining > 0:
                chunk = self.rfile.read(min(remaining, 1 << 16))
                if not chunk:
                    break
                chunks.append(chunk)
                remaining -= len(chunk)
            self._body = b"".join(chunks)
        return self._body

    def _drain_body(self) -> None:
        # keep-alive safety: never leave unread request bytes on the socket
        try:
            self.read_body()
        except Exception:
            self.close_connection = True

    def read_json(self) -> dict:
        body = self.read_body()
        try:
            doc = json.loads(body.decode("utf-8")) if body else {}
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise errors.BadFieldValue(f"request body is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise errors.BadFieldValue("request body must be a JSON object")
        return doc

    def query_value(self, key: str) -> str | None:
        values = self.query.get(key)
        return values[0] if values else None

    # -- response helpers ----------------------------------------------------

    def send_json(self, status: int, obj) -> None:
        data = json.dumps(obj, sort_keys=True).encode("utf-8")
        self.send_bytes(status, data, "application/json")

    def send_bytes(self, status: int, data: bytes,
                   content_type: str = "application/octet-stream",
                   extra_headers: dict[str, str] | None = None) -> None:
        try:
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(data)))
            for key, value in (extra_headers or {}).items():
                self.send_header(key, value)
            self.end_headers()
            if self.command != "HEAD":
                self.wfile.write(data)
        except (BrokenPipeError, ConnectionResetError):
            self.close_connection = True

    def send_proxied(self, status: int, upstream_headers: dict[str, str],
                     body: bytes) -> None:
        """Relay an upstream response, preserving its content type."""
        headers = dict(upstream_headers)
        content_type = "application/octet-stream"
        for key in list(headers):
            if key.lower() == "content-type":
                content_type = headers.pop(key)
        self.send_bytes(status, body, content_type, headers)

    def log_message(self, fmt, *args):  # quiet by default
        log.debug("%s - %s", self.address_string(), fmt % args)


def start_server(service, handler_cls, host: str = "127.0.0.1",
                 port: int = 0) -> tuple[ServiceHTTPServer, threading.Thread]:
    """Bind and serve on a daemon thread; returns (server, thread)."""
    server = ServiceHTTPServer((host, port), handler_cls, service)
    thread = threading.Thread(target=server.serve_forever, daemon=True,
                              name=f"{type(service).__name__}@{server.port}")
    thread.start()
    return server, thread


def raise_for_api_error(response) -> None:
    """Raise the ApiError carried by an httpx error response, if any."""
    if response.status_code < 400:
        return
    try:
        body = response.json()
    except Exception:
        body = None
    raise errors.from_wire(response.status_code, body)


def forwardable_headers(headers) -> dict[str, str]:
    """Copy request headers minus hop-by-hop ones, for proxying."""
    kept: dict[str, str] = {}
    for key, value in headers.items():
        if key.lower() not in HOP_HEADERS:
            kept[key] = value
    return kept


def job_payload(params: dict, inputs) -> list:
    """httpx ``files`` list for a job submission: params field plus inputs.

    The params field is a plain form field (no filename); every input file
    part carries its job-relative name as the filename. Always returns at
    least one entry so the request stays multipart even with zero inputs.
    """
    files: list = [("params", (None, json.dumps(params), "application/json"))]
    for name, data in inputs:
        files.append(("file", (name, data, "application/octet-stream")))
    return files
