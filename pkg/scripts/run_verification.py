#!/usr/bin/env python3
"""Run every verification suite on a few canonical and random windows and print a table."""

import argparse
import json
import sys

from flowberg.measure import LevelWeight, canonical_flow, random_flow
from flowberg.tree import TreeGenSpec, build_tree, homogeneous
from flowberg.verify import SUITES, SuiteOptions, run_suite


def windows(depth, mode):
    for q, k in [(2, 2), (2, 3), (3, 2), (3, 3)]:
        yield f"homogeneous q={q} k={k}", canonical_flow(homogeneous(q, 0, depth), mode), LevelWeight.exponential(k, mode)
    t = build_tree(TreeGenSpec("random", 1, 1 - depth, min_deg=2, max_deg=3, seed=7))
    yield "random deg 2-3 seed 7, k=3", random_flow(t, 7, mode=mode), LevelWeight.exponential(3, mode)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--mode", default="exact")
    ap.add_argument("--functions", type=int, default=10)
    ap.add_argument("--json", help="also write all reports here")
    args = ap.parse_args()

    opts = SuiteOptions(functions=args.functions)
    reports, failed = [], 0
    print(f"{'window':32} {'suite':15} {'cases':>9} {'fail':>5} {'max err':>9} {'time':>7}")
    for label, m, sig in windows(args.depth, args.mode):
        for name in sorted(SUITES):
            if name == "sharp-estimate" and "random" in label:
                continue  # the [1/10, 10] window is a homogeneous-tree statement
            rep = run_suite(name, m, sig, opts, {"window": label})
            failed += rep.failures
            reports.append(rep.to_dict())
            print(f"{label:32} {name:15} {rep.cases:9d} {rep.failures:5d} {rep.max_abs_error:9.1e} {rep.wall_time:6.2f}s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(reports, fh, indent=2, default=str)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
