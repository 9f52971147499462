"""Front-end process: ``python -m sselab.frontend serve ...``.

``add-user`` writes directly to the registry snapshot, so the first
administrator account can be created before the service ever runs.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading
from pathlib import Path

from sselab import wire
from sselab.frontend.service import FrontendHandler, FrontendService
from sselab.frontend.store import Registry


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sselab-frontend",
                                     description="Run the portal front-end.")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="serve the registry and broker")
    serve.add_argument("--data-dir", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=0,
                       help="0 picks a free port; see the port file")
    serve.add_argument("--ui-dir", default=None,
                       help="static bundle served under /ui/")

    adduser = sub.add_parser("add-user", help="create an account offline")
    adduser.add_argument("--data-dir", required=True)
    adduser.add_argument("--admin", action="store_true")
    adduser.add_argument("username")
    adduser.add_argument("password")

    unlock = sub.add_parser("unlock-user", help="clear an account lockout")
    unlock.add_argument("--data-dir", required=True)
    unlock.add_argument("username")

    args = parser.parse_args(argv)

    if args.command == "add-user":
        registry = Registry(args.data_dir)
        user = registry.add_user(args.username, args.password, is_admin=args.admin)
        print(json.dumps(user.to_wire(), sort_keys=True))
        return 0

    if args.command == "unlock-user":
        registry = Registry(args.data_dir)
        user = registry.unlock_user(args.username)
        print(json.dumps(user.to_wire(), sort_keys=True))
        return 0

    data_dir = Path(args.data_dir)
    service = FrontendService(data_dir, ui_dir=args.ui_dir)
    server, thread = wire.start_server(service, FrontendHandler, args.host, args.port)
    (data_dir / "port").write_text(f"{server.port}\n", encoding="utf-8")
    print(f"frontend listening on http://{args.host}:{server.port}", flush=True)

    stop = threading.Event()

    def handle_signal(signum, frame):
        stop.set()

    signal.signal(signal.SIGTERM, handle_signal)
    signal.signal(signal.SIGINT, handle_signal)
    stop.wait()
    server.shutdown()
    thread.join(timeout=5)
    service.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
