#!/usr/bin/env python3
"""Reproduce the headline analytical results on the shipped 7x24 instance:
per-layer throughput table, network summary, design-space grid, and the
comparison against the row-stationary reference.  Everything lands in OUT
(default ./out)."""

import sys

from triarray.cli import main


def run(out: str) -> int:
    rc = 0
    rc |= main(["analyze", "--out", out])
    rc |= main(["dse", "--out", out])
    rc |= main(["compare", "--out", out])
    return rc


if __name__ == "__main__":
    sys.exit(run(sys.argv[1] if len(sys.argv) > 1 else "out"))
