#!/usr/bin/env python3
"""Re-run the headline result tables (thin wrapper over `alphabnn repro-tables`).

Writes table1_wetchicken.csv, table2_wetchicken.csv, table3.csv, table4.csv
plus RUNTIME.txt into --out-dir.  With the default five seeds this is a
multi-hour CPU run; use --seeds 1 for a quick pass.
"""

import argparse
import sys

from alphabnn import cli


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out-dir", default="runs/tables")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    return cli.main(["repro-tables", "--out-dir", args.out_dir,
                     "--seeds", str(args.seeds), "--seed", str(args.seed)])


if __name__ == "__main__":
    sys.exit(main())
