#!/usr/bin/env python3
"""Per-project shared notepad.

Actions: provision (seed the data directory), serve (run the web app),
configure (rewrite settings), destroy (drop a tombstone). The web app
trusts the identity headers injected by the portal proxy: guests get a
read-only page without the entry form and their writes are refused.
"""

import argparse
import html
import json
import sys
import threading
import time
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

USER_HEADER = "X-SSELab-User"
ROLE_HEADER = "X-SSELab-Role"


def notes_path(data_dir: Path) -> Path:
    return data_dir / "notes.json"


def load_notes(data_dir: Path) -> list:
    path = notes_path(data_dir)
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    return []


def save_notes(data_dir: Path, notes: list) -> None:
    notes_path(data_dir).write_text(json.dumps(notes, indent=2), encoding="utf-8")


class NotesHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    data_dir: Path
    lock = threading.Lock()

    def _identity(self):
        return (self.headers.get(USER_HEADER, "anonymous"),
                self.headers.get(ROLE_HEADER, "guest"))

    def _send(self, status, data, content_type="text/html; charset=utf-8"):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        user, role = self._identity()
        with self.lock:
            notes = load_notes(self.data_dir)
        if self.path.startswith("/notes.json"):
            self._send(200, json.dumps(notes).encode("utf-8"), "application/json")
            return
        items = "".join(
            "<li>%s <em>(%s)</em></li>" % (html.escape(n["text"]), html.escape(n["author"]))
            for n in notes
        )
        form = (
            '<form method="post" action="add">'
            '<input name="text"><button>Add note</button></form>'
        )
        page = (
            "<html><body><h1>Notes</h1>"
            "<p>Signed in as %s (%s)</p><ul>%s</ul>%s</body></html>"
            % (html.escape(user), html.escape(role), items,
               form if role != "guest" else "<p>Read-only access.</p>")
        )
        self._send(200, page.encode("utf-8"))

    def do_POST(self):
        user, role = self._identity()
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length)
        if not self.path.rstrip("/").endswith("add"):
            self._send(404, b"no such action", "text/plain")
            return
        if role == "guest":
            self._send(403, b"guests cannot add notes", "text/plain")
            return
        fields = urllib.parse.parse_qs(body.decode("utf-8"))
        text = (fields.get("text") or [""])[0]
        with self.lock:
            notes = load_notes(self.data_dir)
            notes.append({"text": text, "author": user, "at": time.time()})
            save_notes(self.data_dir, notes)
        self._send(200, b"added", "text/plain")

    def log_message(self, fmt, *args):
        pass


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("action", choices=["provision", "serve", "configure", "destroy"])
    parser.add_argument("--dir", required=True)
    parser.add_argument("--port", required=True, type=int)
    args = parser.parse_args()
    data_dir = Path(args.dir)

    if args.action == "provision":
        save_notes(data_dir, [])
        (data_dir / "settings.json").write_text(
            json.dumps({"provisioned_at": time.time()}), encoding="utf-8")
        return 0
    if args.action == "configure":
        (data_dir / "settings.json").write_text(
            json.dumps({"configured_at": time.time()}), encoding="utf-8")
        return 0
    if args.action == "destroy":
        (data_dir / "destroyed.marker").write_text("", encoding="utf-8")
        return 0

    handler = type("BoundHandler", (NotesHandler,), {"data_dir": data_dir})
    server = ThreadingHTTPServer(("127.0.0.1", args.port), handler)
    server.daemon_threads = True
    server.serve_forever()
    return 0


if __name__ == "__main__":
    sys.exit(main())
