#!/usr/bin/env python3
"""Certify the bounds table by exhaustive search and compare it with the known bounds."""
import argparse
import json
import sys
import time

from arsim.search import default_table_n, expected_table, render_table, table1


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--f", type=int, default=1)
    p.add_argument("--n", type=int, help="default 5f+1")
    p.add_argument("--out", help="also write the cells as JSON here")
    args = p.parse_args()

    n = args.n or default_table_n(args.f)
    start = time.perf_counter()
    table = table1(args.f, n)
    expected = expected_table(args.f)
    print(render_table(table, expected))
    print(f"f={args.f} n={n} in {time.perf_counter() - start:.1f}s")
    if args.out:
        cells = {
            row: {col: {"bound": c.text, "least_t_per_tau": c.per_tau} for col, c in cols.items()}
            for row, cols in table.items()
        }
        with open(args.out, "w") as fh:
            json.dump(cells, fh, indent=2, sort_keys=True)
    same = all(table[r][c].text == expected[r][c] for r in expected for c in expected[r])
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
