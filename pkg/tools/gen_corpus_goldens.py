#!/usr/bin/env python3
"""Freeze canonical exports of every corpus script (run from the repo root).

These goldens pin the cross-implementation contract: every shim must reproduce
them byte-for-byte from the same scripts.
"""

import glob
import os
import sys

ROOT = os.path.join(os.path.dirname(__file__), "..")
sys.path.insert(0, os.path.join(ROOT, "src"))
sys.path.insert(0, os.path.join(ROOT, "tests"))

from corpus_replay import replay_file  # noqa: E402
from tracegraph import persist  # noqa: E402


def main() -> None:
    golden_dir = os.path.join(ROOT, "corpus", "golden")
    os.makedirs(golden_dir, exist_ok=True)
    for path in sorted(glob.glob(os.path.join(ROOT, "corpus", "scripts", "*.json"))):
        name = os.path.splitext(os.path.basename(path))[0]
        graph = replay_file(path)
        out = os.path.join(golden_dir, f"{name}.trace.json")
        with open(out, "wb") as fh:
            fh.write(persist.export(graph, canonical=True))
        print("wrote", out)


if __name__ == "__main__":
    main()
