#!/usr/bin/env python3
"""Least working t per tau for one model, from exhaustive search."""
import argparse

from arsim.oracle import COMPLETENESS, PROPERTIES, STRONG_ACCURACY, WEAK_ACCURACY
from arsim.search import SearchSpace, summarize

COMBOS = [(p,) for p in PROPERTIES] + [(COMPLETENESS, WEAK_ACCURACY), (COMPLETENESS, STRONG_ACCURACY)]


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--model", default="fast")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--f", type=int, default=1)
    args = p.parse_args()

    print("tau  " + "  ".join(f"{'+'.join(c):>30}" for c in COMBOS))
    for tau in range(args.f + 1, args.n + 1):
        summary = summarize(SearchSpace(args.n, args.f, tau, args.model))
        row = []
        for combo in COMBOS:
            ok = summary.satisfying(combo)
            row.append(f"{'t>=' + str(ok[0]) if ok else '-':>30}")
        print(f"{tau:>3}  " + "  ".join(row))


if __name__ == "__main__":
    main()
