#!/usr/bin/env python3
"""Correlate regional abatement costs with development features.

Runs the club-with-defection ensemble (40 episodes by default), pools
per-region totals, and writes correlations.csv plus one scatter per
feature: capital, production factor, carbon intensity, gross output.
"""

import argparse
import sys

from clubsim.cli import main as clubsim_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/correlate")
    parser.add_argument("--runs", type=int, default=40)
    parser.add_argument("--seed", type=int, default=2026)
    args = parser.parse_args()
    return clubsim_main([
        "correlate",
        "--runs", str(args.runs),
        "--seed", str(args.seed),
        "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
