#!/usr/bin/env python3
"""Sweep the two-reader scenario over n, tau and t, and show that no t gives both properties."""
import argparse
import sys

from arsim.oracle import COMPLETENESS, STRONG_ACCURACY
from arsim.scenario import render_sweep, sweep


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, nargs="+", default=[4, 5, 6, 7])
    p.add_argument("--model", default="fast")
    args = p.parse_args()

    found_both = False
    for n in args.n:
        cells = sweep("figure2", taus=range(3, n + 1), ts=range(1, n + 1), ns=[n], models=[args.model])
        print(render_sweep(cells))
        for c in cells:
            if c.verdicts and c.verdicts[COMPLETENESS] and c.verdicts[STRONG_ACCURACY]:
                found_both = True
                print(f"both hold at n={n} tau={c.tau} t={c.t}")
    return 1 if found_both else 0


if __name__ == "__main__":
    sys.exit(main())
