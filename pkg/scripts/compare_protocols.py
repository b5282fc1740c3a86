#!/usr/bin/env python3
"""Compare no-protocol, base club, and club-with-defection on defaults.

Produces the headline experiment: per-variant temperature rise, pathway
labels, metrics.csv, and trajectory charts under the output directory.
"""

import argparse
import sys

from clubsim.cli import main as clubsim_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/compare")
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--variants", default="none,bc,bc+dd")
    args = parser.parse_args()
    return clubsim_main([
        "compare",
        "--variants", args.variants,
        "--runs", str(args.runs),
        "--seed", str(args.seed),
        "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
