"""Client configuration and token cache under ``~/.sselab/``.

config.json fields: ``frontend_url`` and ``local_tools`` (service id to
executable path). The token cache is a separate owner-only file so that
config.json can be checked into dotfiles without leaking credentials.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

DEFAULT_URL = "http://127.0.0.1:8080"


def config_dir() -> Path:
    return Path.home() / ".sselab"


def load_config() -> dict:
    path = config_dir() / "config.json"
    if not path.exists():
        return {}
    try:
        doc = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError):
        return {}
    return doc if isinstance(doc, dict) else {}


def frontend_url(config: dict, override: str | None = None) -> str:
    url = (override
           or os.environ.get("SSELAB_URL")
           or config.get("frontend_url")
           or DEFAULT_URL)
    return str(url).rstrip("/")


def local_tools(config: dict) -> dict:
    tools = config.get("local_tools", {})
    return tools if isinstance(tools, dict) else {}


def token_path() -> Path:
    return config_dir() / "token.json"


def save_token(url: str, token: str, expires_at: float) -> None:
    config_dir().mkdir(parents=True, exist_ok=True)
    path = token_path()
    path.write_text(json.dumps({
        "frontend_url": url,
        "token": token,
        "expires_at": expires_at,
    }, indent=2), encoding="utf-8")
    os.chmod(path, 0o600)


def load_token(url: str) -> str | None:
    path = token_path()
    if not path.exists():
        return None
    try:
        doc = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    if not isinstance(doc, dict) or doc.get("frontend_url") != url:
        return None
    if float(doc.get("expires_at") or 0) <= time.time():
        return None
    token = doc.get("token")
    return token if isinstance(token, str) else None
