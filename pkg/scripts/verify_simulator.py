#!/usr/bin/env python3
"""Desk-scale simulator verification: run the 13 layers at reduced spatial
dims through the cycle-accurate engine and check every output bit against the
integer convolution reference.  Writes the per-layer report JSON and a slice
cycle trace to OUT (default ./out).

Usage: verify_simulator.py [OUT] [SCALE] [SEED]
"""

import sys

from triarray.cli import main


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out"
    scale = sys.argv[2] if len(sys.argv) > 2 else "8"
    seed = sys.argv[3] if len(sys.argv) > 3 else "1"
    sys.exit(main(["simulate", "--out", out, "--scale", scale,
                   "--seed", seed, "--trace"]))
