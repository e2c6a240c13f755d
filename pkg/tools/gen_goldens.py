#!/usr/bin/env python3
"""Regenerate committed golden fixtures (seed-7 trace and dot files).

Run from the repo root: python3 tools/gen_goldens.py
Goldens are frozen; regeneration should be a no-op unless formats change.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from tracegraph import persist  # noqa: E402
from tracegraph.faultsim import SimConfig, generate  # noqa: E402

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "golden")


def main() -> None:
    os.makedirs(GOLDEN_DIR, exist_ok=True)
    case = generate(SimConfig(seed=7), case_id="seed7")
    with open(os.path.join(GOLDEN_DIR, "seed7.trace.json"), "wb") as fh:
        fh.write(persist.export(case.graph, canonical=True))
    with open(os.path.join(GOLDEN_DIR, "seed7.dot"), "wb") as fh:
        fh.write(persist.export_dot(case.graph))
    print("goldens written to", GOLDEN_DIR)


if __name__ == "__main__":
    main()
