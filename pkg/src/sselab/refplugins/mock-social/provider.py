#!/usr/bin/env python3
"""Canned profile provider.

``fetch --grant G`` prints the JSON fixture for grant G on stdout.
Exit 2 means the grant was refused (expired or unknown); any other
failure is a provider error.
"""

import argparse
import re
import sys
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent / "fixtures"
GRANT_RE = re.compile(r"[A-Za-z0-9_-]{1,64}")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("action", choices=["fetch"])
    parser.add_argument("--grant", required=True)
    args = parser.parse_args()

    if args.grant == "expired":
        print("grant expired", file=sys.stderr)
        return 2
    if not GRANT_RE.fullmatch(args.grant):
        print("malformed grant", file=sys.stderr)
        return 2
    fixture = FIXTURES / (args.grant + ".json")
    if not fixture.is_file():
        print("unknown grant", file=sys.stderr)
        return 2
    sys.stdout.write(fixture.read_text(encoding="utf-8"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
