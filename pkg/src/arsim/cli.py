"""Command line: run scenarios, sweep thresholds, search adversaries, print the bounds table.

Exit status: 0 when every expected verdict matched, 1 on a mismatch, 2 on a
usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .emulation import MODELS, ConfigError
from .scenario import RunFailure, ScenarioError, load_scenario, render_sweep, run, sweep
from .search import SearchSpace, SearchTooLarge, emit, expected_table, find_violation, parse_properties, render_table, table1

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2


def parse_range(text: str) -> list[int]:
    """``"3"`` or ``"1..6"`` (inclusive)."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or A..B, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return list(range(lo, hi + 1))


def _models(text: str) -> list[str]:
    names = [m for m in text.split(",") if m]
    for m in names:
        if m not in MODELS:
            raise argparse.ArgumentTypeError(f"unknown model {m!r}; choose from {', '.join(MODELS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario file and judge its audits")
    r.add_argument("scenario", help="path, or the name of a bundled scenario")
    r.add_argument("--t", type=int, help="evidence threshold (overrides the file)")
    r.add_argument("--model", choices=sorted(MODELS))
    r.add_argument("--json", action="store_true", help="machine-readable JSON lines")
    r.add_argument("--trace", type=Path, help="also write the event trace as JSON lines")

    s = sub.add_parser("sweep", help="run a scenario template over tau, t, n and models")
    s.add_argument("template")
    s.add_argument("--tau", type=parse_range, required=True)
    s.add_argument("--t", type=parse_range, required=True)
    s.add_argument("--n", type=parse_range)
    s.add_argument("--model", type=_models, help="comma-separated model names")
    s.add_argument("--json", action="store_true")

    q = sub.add_parser("search", help="exhaustive adversary search")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--f", type=int, required=True)
    q.add_argument("--property", required=True, help="a property or p1+p2")
    q.add_argument("--tau", type=parse_range, help="default: f+1..n")
    q.add_argument("--t", type=int, help="fixed threshold; default asks whether any t works")
    q.add_argument("--model", choices=sorted(MODELS), default="fast")
    q.add_argument("--cap", type=int, default=None, help="maximum adversary states per space")
    q.add_argument("--expect", choices=["violation", "none"], help="exit 1 unless the outcome matches")
    q.add_argument("--emit", type=Path, help="write counterexamples as scenario files here")
    q.add_argument("--json", action="store_true")

    t = sub.add_parser("report", help="print the bounds table")
    t.add_argument("which", choices=["table1"])
    t.add_argument("--f", type=int, required=True)
    t.add_argument("--n", type=int)
    t.add_argument("--json", action="store_true")
    return p


def cmd_run(args) -> int:
    scen = load_scenario(args.scenario, t=args.t, model=args.model)
    report = run(scen)
    if args.trace:
        args.trace.write_text(report.trace.to_jsonl())
    lines = report.json_lines() if args.json else report.summary_lines()
    print("\n".join(lines))
    return EXIT_OK if report.ok else EXIT_MISMATCH


def cmd_sweep(args) -> int:
    cells = sweep(args.template, args.tau, args.t, args.n, args.model)
    if args.json:
        for c in cells:
            print(json.dumps({
                "model": c.model, "n": c.n, "tau": c.tau, "t": c.t,
                "verdicts": c.verdicts, "witnesses": c.witnesses,
            }, sort_keys=True))
    else:
        print(render_sweep(cells))
    return EXIT_OK


def cmd_search(args) -> int:
    props = parse_properties(args.property)
    taus = args.tau or list(range(args.f + 1, args.n + 1))
    status = EXIT_OK
    for tau in taus:
        kw = {} if args.cap is None else {"cap": args.cap}
        space = SearchSpace(args.n, args.f, tau, args.model, **kw)
        res = find_violation(space, props, args.t)
        cx = res.counterexample
        sound = cx is None or not cx.verdict.holds
        if args.json:
            print(json.dumps({
                "model": args.model, "n": args.n, "f": args.f, "tau": tau, "t": args.t,
                "properties": list(props), "violated": res.violated,
                "states_explored": res.states_explored,
                "satisfying_t": res.satisfying_thresholds,
                "counterexample": None if cx is None else {
                    "property": cx.property, "t": cx.t, "reader": cx.pair[0], "label": cx.pair[1],
                    "records": cx.records, "replayed": not cx.verdict.holds,
                },
            }, sort_keys=True))
        else:
            print(f"tau={tau} {res.line()}")
        if args.emit and cx is not None:
            path = emit(res, args.emit)
            if not args.json:
                print(f"  wrote {path}")
        if not sound:
            print(f"  replay of the counterexample did not reproduce the violation", file=sys.stderr)
            status = EXIT_MISMATCH
        if args.expect and res.violated != (args.expect == "violation"):
            status = EXIT_MISMATCH
    return status


def cmd_report(args) -> int:
    table = table1(args.f, args.n)
    expected = expected_table(args.f)
    if args.json:
        for row, cells in table.items():
            for col, cell in cells.items():
                print(json.dumps({
                    "model": row, "column": col, "bound": cell.text,
                    "expected": expected[row][col],
                    "least_t_per_tau": {str(k): v for k, v in cell.per_tau.items()},
                }, sort_keys=True))
    else:
        print(render_table(table, expected))
    matched = all(table[r][c].text == expected[r][c] for r in table for c in table[r])
    return EXIT_OK if matched else EXIT_MISMATCH


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    handler = {"run": cmd_run, "sweep": cmd_sweep, "search": cmd_search, "report": cmd_report}[args.command]
    try:
        return handler(args)
    except (ScenarioError, ConfigError, ValueError, SearchTooLarge) as exc:
        print(f"arsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RunFailure as exc:
        print(f"arsim: run failed: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
