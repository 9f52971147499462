#!/usr/bin/env python3
"""Sort the lines of every input file.

Reads params from the JSON file given as argv[1], processes everything
under inputs/ and writes each sorted file under outputs/ with the same
relative name.
"""

import json
import sys
from pathlib import Path


def sort_text(text: str, order: str, unique: bool) -> str:
    lines = text.splitlines()
    lines.sort(reverse=(order == "desc"))
    if unique:
        deduped = []
        for line in lines:
            if not deduped or deduped[-1] != line:
                deduped.append(line)
        lines = deduped
    return "".join(line + "\n" for line in lines)


def main() -> int:
    params = json.loads(Path(sys.argv[1]).read_text(encoding="utf-8"))
    order = params.get("order", "asc")
    unique = bool(params.get("unique", False))
    inputs = Path("inputs")
    outputs = Path("outputs")
    done = 0
    for path in sorted(p for p in inputs.rglob("*") if p.is_file()):
        rel = path.relative_to(inputs)
        target = outputs / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(sort_text(path.read_text(encoding="utf-8"), order, unique),
                          encoding="utf-8")
        done += 1
    print(f"sorted {done} file(s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
