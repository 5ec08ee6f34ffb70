#!/usr/bin/env python3
"""Run a Toeplitz condition/probe sweep and summarise agreement with the homogeneous verdict.

    python scripts/run_sweep.py scripts/corollary_grid.toml -o sweep.csv
"""

import argparse
import csv
import sys
from collections import Counter
from pathlib import Path

from flowberg.cli import SWEEP_COLUMNS, sweep_rows, tomllib


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("grid", type=Path)
    ap.add_argument("-o", "--output", type=Path, default=Path("sweep.csv"))
    args = ap.parse_args()

    grid = tomllib.loads(args.grid.read_text())
    rows = list(sweep_rows(grid))
    with args.output.open("w", newline="") as fh:
        w = csv.DictWriter(fh, SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)

    tally = Counter((r["corollary_bounded"], r["probe_class"]) for r in rows)
    disagree = [r for r in rows if r["corollary_bounded"] != (r["probe_class"] == "stable")]
    flagged = [r for r in rows if r["discrepancy"]]
    print(f"{len(rows)} tuples -> {args.output}")
    for (bounded, cls), n in sorted(tally.items()):
        print(f"  corollary bounded={bounded!s:5}  probe={cls:13} {n}")
    print(f"rows where the two equality readings differ: {len(flagged)}")
    for r in flagged[:10]:
        print(f"  a={r['a']} b={r['b']} c={r['c']} d={r['d']} p={r['p']}: probe says {r['probe_class']}")
    print(f"probe/corollary disagreements: {len(disagree)}")
    return 1 if disagree else 0


if __name__ == "__main__":
    sys.exit(main())
