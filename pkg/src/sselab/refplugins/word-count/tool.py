#!/usr/bin/env python3
"""Count words in every input file.

Writes outputs/{name}.counts with the per-file count and
outputs/counts.txt with the total across all inputs; counts are bare
decimals with no trailing newline.
"""

import sys
from pathlib import Path


def main() -> int:
    inputs = Path("inputs")
    outputs = Path("outputs")
    total = 0
    for path in sorted(p for p in inputs.rglob("*") if p.is_file()):
        rel = path.relative_to(inputs)
        words = len(path.read_text(encoding="utf-8").split())
        total += words
        target = outputs / (rel.as_posix() + ".counts")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(str(words), encoding="utf-8")
    (outputs / "counts.txt").write_text(str(total), encoding="utf-8")
    print(f"counted {total} word(s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
