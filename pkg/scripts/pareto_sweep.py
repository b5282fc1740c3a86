#!/usr/bin/env python3
"""Sweep every valid design-element combination and classify dominance.

Writes per-run metrics, the dominance-colored scatter, and trajectory
charts for all ten valid variants of the club protocol.
"""

import argparse
import sys

from clubsim.cli import main as clubsim_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/pareto")
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    return clubsim_main([
        "pareto",
        "--runs", str(args.runs),
        "--seed", str(args.seed),
        "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
