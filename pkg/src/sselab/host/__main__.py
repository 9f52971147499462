"""Back-end host process: ``python -m sselab.host serve ...``."""

from __future__ import annotations

import argparse
import signal
import sys
import threading
from pathlib import Path

from sselab import wire
from sselab.host.service import BackendHost, HostHandler
from sselab.model import ServiceCategory


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sselab-backend",
                                     description="Run a back-end host.")
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve", help="serve one back-end category")
    serve.add_argument("--category", required=True,
                       choices=["base", "ostp", "social"])
    serve.add_argument("--data-dir", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=0,
                       help="0 picks a free port; see the port file")
    serve.add_argument("--max-concurrent-jobs", type=int, default=4)
    serve.add_argument("--job-ttl-seconds", type=float, default=3600.0)
    serve.add_argument("--serve-start-timeout", type=float, default=10.0)
    args = parser.parse_args(argv)

    data_dir = Path(args.data_dir)
    host = BackendHost(
        data_dir,
        ServiceCategory.parse(args.category),
        max_concurrent_jobs=args.max_concurrent_jobs,
        job_ttl_seconds=args.job_ttl_seconds,
        serve_start_timeout_s=args.serve_start_timeout,
    )
    server, thread = wire.start_server(host, HostHandler, args.host, args.port)
    (data_dir / "port").write_text(f"{server.port}\n", encoding="utf-8")
    print(f"backend {args.category} listening on "
          f"http://{args.host}:{server.port}", flush=True)

    stop = threading.Event()

    def handle_signal(signum, frame):
        stop.set()

    signal.signal(signal.SIGTERM, handle_signal)
    signal.signal(signal.SIGINT, handle_signal)
    stop.wait()
    server.shutdown()
    thread.join(timeout=5)
    host.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
