"""Exhaustive adversary search at small n.

The skeleton is fixed: write v completely, let one active reader read, write
x to any subset of objects, then audit once.  A second, passive correct reader
never reads; it is the target of forged records.  The adversary chooses

* whether the active reader is correct or faulty,
* per object: whether x reaches it and whether the read reaches it
  before x, after x, or (faulty readers only) not at all,
* per faulty object: whether it withholds blocks from the reader and which
  records it hands the auditor, any subset of
  {active, passive} x {v, x, a never-written label},
* which f objects the audit does not hear from.

Objects with equal profiles are interchangeable, so correct objects are
enumerated as multisets and quorums up to that symmetry.  Each execution is
simulated once; the faulty objects' log choices and the quorum only change
what the audit counts, so they are evaluated on the recorded logs.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from .audit import verify_record
from .base_object import ReadRecord, _replay_token, rw_get_log
from .emulation import MODELS, ModelConfig
from .oracle import (
    ALL_PROPERTIES,
    COMPLETENESS,
    PROPERTIES,
    STRONG_ACCURACY,
    WEAK_ACCURACY,
    PropertyVerdict,
    TraceFacts,
)
from .scenario import BOGUS, RunReport, execute, instantiate, run

NONE, NOW, BEFORE, AFTER = "none", "now", "before", "after"
ACTIVE, PASSIVE = "r1", "r2"
ALIASES = ("v", "x", "bogus")
DEFAULT_CAP = 5_000_000

# Row labels used for the bounds table, in display order.
TABLE_MODELS = (
    ("baseline", "fast"),
    ("SR", "signed"),
    ("TO", "total"),
    ("NF", "nonfast"),
    ("TO+SR", "total-signed"),
    ("NF+SR", "nonfast-signed"),
)
TABLE_COLUMNS = (
    COMPLETENESS,
    WEAK_ACCURACY,
    f"{COMPLETENESS}+{WEAK_ACCURACY}",
    STRONG_ACCURACY,
    f"{COMPLETENESS}+{STRONG_ACCURACY}",
)


class SearchTooLarge(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class ObjectProfile:
    x: bool
    status: str
    omit: bool = False

    def code(self) -> str:
        return f"{'x' if self.x else '-'}{self.status[0]}{'o' if self.omit else ''}"


@dataclass(frozen=True)
class Execution:
    reader_correct: bool
    request: str | None  # faulty non-fast reader naming a label directly
    phase: str | None  # total order: whether the read precedes x
    faulty: tuple[ObjectProfile, ...]
    correct: tuple[ObjectProfile, ...]

    @property
    def profiles(self) -> tuple[ObjectProfile, ...]:
        return self.faulty + self.correct


@dataclass(frozen=True)
class SearchSpace:
    n: int
    f: int
    tau: int
    model: str = "fast"
    reader_kinds: tuple[bool, ...] = (True, False)
    cap: int | None = DEFAULT_CAP

    def __post_init__(self) -> None:
        self.cfg()  # validates n, f, tau and model

    def cfg(self, t: int = 1) -> ModelConfig:
        return ModelConfig.for_model(self.model, n=self.n, f=self.f, tau=self.tau, t=t)

    @property
    def thresholds(self) -> range:
        return range(1, self.n + 1)

    @property
    def total_order(self) -> bool:
        return MODELS[self.model]["total_order"]

    @property
    def non_fast(self) -> bool:
        return MODELS[self.model]["read_mode"] == "non_fast"

    @property
    def universe(self) -> tuple[tuple[str, str], ...]:
        return tuple((r, a) for r in (ACTIVE, PASSIVE) for a in ALIASES)

    def correct_profiles(self, reader_correct: bool) -> list[ObjectProfile]:
        if self.total_order:
            statuses = [(True, NOW)] if reader_correct else [(True, NONE), (True, NOW)]
        else:
            statuses = [(False, NOW), (True, BEFORE), (True, AFTER)]
            if not reader_correct:
                statuses = [(False, NONE)] + statuses[:1] + [(True, NONE)] + statuses[1:]
        return [ObjectProfile(x, s) for x, s in statuses]

    def faulty_profiles(self, reader_correct: bool) -> list[ObjectProfile]:
        out = []
        for p in self.correct_profiles(reader_correct):
            out.append(p)
            if p.status != NONE:
                out.append(ObjectProfile(p.x, p.status, omit=True))
        return out

    def requests(self, reader_correct: bool) -> tuple[str | None, ...]:
        return ("v", "x") if self.non_fast and not reader_correct else (None,)

    def phases(self) -> tuple[str | None, ...]:
        return (BEFORE, AFTER) if self.total_order else (None,)

    def executions(self) -> Iterator[Execution]:
        for reader_correct in self.reader_kinds:
            cp = self.correct_profiles(reader_correct)
            fp = self.faulty_profiles(reader_correct)
            for request in self.requests(reader_correct):
                for phase in self.phases():
                    for faulty in itertools.combinations_with_replacement(fp, self.f):
                        for correct in itertools.combinations_with_replacement(cp, self.n - self.f):
                            yield Execution(reader_correct, request, phase, faulty, correct)

    def execution_count(self) -> int:
        """Closed form: multisets of profiles times reader and timing choices."""
        total = 0
        for reader_correct in self.reader_kinds:
            c = len(self.correct_profiles(reader_correct))
            fp = len(self.faulty_profiles(reader_correct))
            total += (
                len(self.requests(reader_correct))
                * len(self.phases())
                * math.comb(fp + self.f - 1, self.f)
                * math.comb(c + self.n - self.f - 1, self.n - self.f)
            )
        return total

    @property
    def variant_count(self) -> int:
        return 2 ** (len(self.universe) * self.f)

    def state_count(self) -> int:
        return self.execution_count() * self.variant_count

    def variants(self) -> Iterator[tuple[frozenset, ...]]:
        """Log choices for the faulty objects: one subset of the universe each."""
        u = self.universe
        for bits in range(self.variant_count):
            out = []
            for j in range(self.f):
                chunk = bits >> (j * len(u))
                out.append(frozenset(u[i] for i in range(len(u)) if chunk >> i & 1))
            yield tuple(out)


def quorum_exclusions(space: SearchSpace, ex: Execution) -> list[tuple[int, ...]]:
    """Which f objects the audit does not hear from, one per symmetry class."""
    classes = [("F", k) for k in range(1, space.f + 1)] + [("C", p) for p in ex.correct]
    seen = set()
    out = []
    for combo in itertools.combinations(range(1, space.n + 1), space.f):
        key = tuple(sorted(classes[k - 1] for k in combo))
        if key not in seen:
            seen.add(key)
            out.append(combo)
    return out


def execution_doc(
    space: SearchSpace,
    ex: Execution,
    logs: Sequence[frozenset] | None = None,
    excluded: Sequence[int] | None = None,
    expect: list[dict] | None = None,
) -> dict:
    """The scenario document for one execution; with ``logs`` and ``excluded`` it includes the audit."""
    n, f = space.n, space.f
    idx = list(range(1, n + 1))
    prof = dict(zip(idx, ex.profiles))
    targets = [k for k in idx if prof[k].status != NONE]
    objects = []
    for k in range(1, f + 1):
        entry: dict = {"objects": [k], "faulty": True}
        if prof[k].omit:
            entry["omit_block_to"] = [{"reader": ACTIVE, "label": "*"}]
        if logs is not None:
            entry["omit_records_to_audit"] = True
            entry["fabricate"] = [{"reader": r, "label": a} for r, a in sorted(logs[k - 1])]
        objects.append(entry)
    read: dict = {"op": "read", "id": "read", "reader": ACTIVE, "targets": targets}
    if ex.request is not None:
        read["request"] = ex.request
    steps: list[dict] = [{"op": "write", "id": "write_v", "as": "v", "writer": "w1", "value": "v"}]
    write_x: dict = {"op": "write", "id": "write_x", "as": "x", "writer": "w1", "value": "x"}
    if space.total_order:
        steps += [read, write_x] if ex.phase == BEFORE else [write_x, read]
    else:
        now = [k for k in targets if prof[k].status in (NOW, BEFORE)]
        later = [k for k in targets if prof[k].status == AFTER]
        read["deliver"] = now
        if later:
            read["late"] = [{"to": later, "at": "write_x"}]
        write_x["deliver"] = [k for k in idx if prof[k].x]
        steps += [read, write_x]
    if excluded is not None:
        steps.append({"op": "audit", "id": "audit", "auditor": "a1", "quorum": [k for k in idx if k not in excluded]})
    doc = {
        "name": f"search-{space.model}-n{n}-f{f}-tau{space.tau}",
        "description": "Adversary found by exhaustive search. Profiles: "
        + " ".join(f"{k}:{p.code()}" for k, p in prof.items()),
        "cfg": {"n": n, "f": f, "tau": space.tau, "t": 1, "model": space.model},
        "seed": 0,
        "readers": {ACTIVE: {"correct": ex.reader_correct}, PASSIVE: {"correct": True}},
        "writers": ["w1"],
        "auditors": ["a1"],
        "objects": objects,
        "steps": steps,
    }
    if expect:
        doc["expect"] = expect
    return doc


@dataclass(frozen=True)
class Witness:
    """First adversary (in enumeration order) violating one property at one t."""

    ordinal: tuple[int, int, int]
    execution: Execution
    logs: tuple[frozenset, ...]
    excluded: tuple[int, ...]
    pair: tuple[str, str]
    count: int
    forged: bool  # some faulty object in the quorum attests the pair without having served it


@dataclass
class Counterexample:
    property: str
    t: int
    witness: Witness
    scenario: dict
    run: RunReport
    verdict: PropertyVerdict

    @property
    def pair(self) -> tuple[str, str]:
        return self.witness.pair

    @property
    def records(self) -> int:
        return self.witness.count

    @property
    def forged(self) -> bool:
        return self.witness.forged

    def dumps(self) -> str:
        return json.dumps(self.scenario, indent=2, sort_keys=False) + "\n"


@dataclass
class _Evaluated:
    """One simulated execution, reduced to what the audit could count."""

    execution: Execution
    facts: TraceFacts
    pairs: dict[tuple[str, str], object]  # alias pair -> Label
    correct_holders: dict[tuple[str, str], frozenset[int]]
    served_by_faulty: dict[int, frozenset[tuple[str, str]]]
    accepted: dict[int, frozenset[tuple[str, str]]]
    effective: list[tuple[str, str]]
    offending: dict[str, list[tuple[str, str]]]


def _evaluate(space: SearchSpace, ex: Execution) -> _Evaluated:
    doc = execution_doc(space, ex)
    scen = instantiate(doc, check_schema=False, seed=0)
    reg, _ = execute(scen)
    labels = {a: scen.label(a) for a in ALIASES}
    by_label = {v: a for a, v in labels.items()}
    facts = TraceFacts.from_trace(reg.trace)
    signing = space.cfg().signing
    correct_holders: dict[tuple[str, str], set[int]] = {p: set() for p in space.universe}
    served: dict[int, frozenset] = {}
    accepted: dict[int, frozenset] = {}
    for obj in reg.objects:
        if obj.faulty:
            served[obj.index] = frozenset((r.reader, by_label[r.label]) for r in obj.log)
            ok = set()
            for r, a in space.universe:
                rec = ReadRecord(r, labels[a], _replay_token(obj, ReadRecord(r, labels[a])))
                if signing == "none" or verify_record(rec, reg.tokens, obj.index, signing):
                    ok.add((r, a))
            accepted[obj.index] = frozenset(ok)
            continue
        for rec in rw_get_log(obj):
            if signing != "none" and not verify_record(rec, reg.tokens, obj.index, signing):
                continue
            correct_holders.setdefault((rec.reader, by_label[rec.label]), set()).add(obj.index)
    alias_pair = {(r, labels[a]): (r, a) for r, a in space.universe}
    effective = [alias_pair[p] for p in facts.effective()]
    offending = {
        prop: [(r, a) for r, a in space.universe if facts.offends(prop, (r, labels[a]))]
        for prop in ALL_PROPERTIES
        if prop != COMPLETENESS
    }
    return _Evaluated(
        ex,
        facts,
        labels,
        {p: frozenset(s) for p, s in correct_holders.items()},
        served,
        accepted,
        effective,
        offending,
    )


@dataclass
class SpaceSummary:
    """First witness per (property, t) over the whole space."""

    space: SearchSpace
    first: dict[tuple[str, int], Witness]
    states_explored: int
    executions: int
    quorums_checked: int

    def violated(self, prop: str, t: int) -> bool:
        return (prop, t) in self.first

    def satisfying(self, props: Sequence[str]) -> list[int]:
        return [t for t in self.space.thresholds if not any(self.violated(p, t) for p in props)]


def _adversaries(space: SearchSpace) -> Iterator[tuple[tuple[int, int, int], _Evaluated, tuple, tuple, dict]]:
    """Yield (ordinal, evaluated execution, logs, excluded, counts) in enumeration order."""
    variants = list(space.variants())
    for ei, ex in enumerate(space.executions()):
        ev = _evaluate(space, ex)
        for vi, logs in enumerate(variants):
            for qi, excluded in enumerate(quorum_exclusions(space, ex)):
                counts = {}
                for pair in space.universe:
                    c = len(ev.correct_holders.get(pair, frozenset()) - set(excluded))
                    for k in range(1, space.f + 1):
                        if k not in excluded and pair in logs[k - 1] and pair in ev.accepted[k]:
                            c += 1
                    counts[pair] = c
                yield (ei, vi, qi), ev, logs, excluded, counts


def _violations(space: SearchSpace, ev: _Evaluated, counts: dict, props: Iterable[str]) -> Iterator[tuple[str, int, tuple[str, str]]]:
    """(property, t, witness pair) for every t the adversary breaks."""
    for prop in props:
        pairs = ev.effective if prop == COMPLETENESS else ev.offending[prop]
        for t in space.thresholds:
            pair = _breaking_pair(prop, pairs, counts, t)
            if pair is not None:
                yield prop, t, pair


def _forged(ev: _Evaluated, logs: tuple, excluded: tuple, pair: tuple[str, str]) -> bool:
    return any(
        k not in excluded and pair in logs[k - 1] and pair in ev.accepted[k] and pair not in ev.served_by_faulty[k]
        for k in ev.served_by_faulty
    )


def _check_cap(space: SearchSpace) -> None:
    states = space.state_count()
    if space.cap is not None and states > space.cap:
        raise SearchTooLarge(f"{states} adversary states exceed the cap of {space.cap}")


@functools.lru_cache(maxsize=256)
def summarize(space: SearchSpace) -> SpaceSummary:
    """Walk the full space once and keep the first witness for every (property, t)."""
    _check_cap(space)
    first: dict[tuple[str, int], Witness] = {}
    open_ts = {p: set(space.thresholds) for p in ALL_PROPERTIES}
    variants = list(space.variants())
    executions = 0
    quorums = 0
    for ei, ex in enumerate(space.executions()):
        executions += 1
        ev = _evaluate(space, ex)
        exclusions = quorum_exclusions(space, ex)
        quorums += len(exclusions)
        bases = []
        for excluded in exclusions:
            base = {p: len(ev.correct_holders.get(p, frozenset()) - set(excluded)) for p in space.universe}
            bases.append((excluded, base, [k for k in range(1, space.f + 1) if k not in excluded]))
        # ordinals grow along this loop, so the first hit for a (property, t) is final
        for vi, logs in enumerate(variants):
            for qi, (excluded, base, in_quorum) in enumerate(bases):
                if vi and not in_quorum:
                    continue  # without a faulty object in the quorum every log choice looks the same
                counts = dict(base)
                for k in in_quorum:
                    for pair in logs[k - 1] & ev.accepted[k]:
                        counts[pair] += 1
                for prop in ALL_PROPERTIES:
                    todo = open_ts[prop]
                    if not todo:
                        continue
                    pairs = ev.effective if prop == COMPLETENESS else ev.offending[prop]
                    if not pairs:
                        continue
                    if prop == COMPLETENESS:
                        low = min(counts[p] for p in pairs)
                        hits = [t for t in todo if t > low]
                    else:
                        high = max(counts[p] for p in pairs)
                        hits = [t for t in todo if t <= high]
                    for t in sorted(hits):
                        pair = _breaking_pair(prop, pairs, counts, t)
                        if pair is not None:
                            todo.discard(t)
                            first[(prop, t)] = Witness(
                                (ei, vi, qi), ex, logs, excluded, pair, counts[pair], _forged(ev, logs, excluded, pair)
                            )
    return SpaceSummary(space, first, executions * space.variant_count, executions, quorums)


def _breaking_pair(prop: str, pairs, counts, t: int):
    for pair in pairs:
        if (counts[pair] < t) if prop == COMPLETENESS else (counts[pair] >= t):
            return pair
    return None


@dataclass
class SearchResult:
    properties: tuple[str, ...]
    t: int | None
    violated: bool
    counterexample: Counterexample | None
    states_explored: int
    satisfying_thresholds: list[int] = field(default_factory=list)
    violated_thresholds: list[int] = field(default_factory=list)

    def line(self) -> str:
        what = "+".join(self.properties)
        at = f" t={self.t}" if self.t is not None else ""
        if not self.violated:
            ok = ",".join(map(str, self.satisfying_thresholds))
            return f"{what}{at}: no violation over {self.states_explored} states (t satisfying: {ok})"
        cx = self.counterexample
        return (
            f"{what}{at}: VIOLATED over {self.states_explored} states; "
            f"first counterexample at t={cx.t} breaks {cx.property} via reader={cx.pair[0]} label={cx.pair[1]} "
            f"({cx.records} records)"
        )


def parse_properties(text: str | Sequence[str]) -> tuple[str, ...]:
    props = tuple(text.split("+")) if isinstance(text, str) else tuple(text)
    for p in props:
        if p not in ALL_PROPERTIES:
            raise ValueError(f"unknown property {p!r}; choose from {', '.join(ALL_PROPERTIES)}")
    return props


def materialize(space: SearchSpace, prop: str, t: int, w: Witness) -> Counterexample:
    """Turn a witness into a replayable scenario and replay it through the runner."""
    doc = execution_doc(space, w.execution, w.logs, w.excluded, expect=[{"t": t, prop: False}])
    doc["cfg"]["t"] = t
    report = run(instantiate(doc))
    verdict = report.verdicts(t, props=[prop])[prop]
    return Counterexample(prop, t, w, doc, report, verdict)


def find_violation(
    space: SearchSpace,
    properties: str | Sequence[str],
    t: int | None = None,
    where: Callable[[Counterexample], bool] | None = None,
) -> SearchResult:
    """Search the space for a violation of ``properties`` (all at once).

    With ``t`` the question is whether some adversary breaks one of the
    properties at that threshold.  Without ``t`` it is whether every
    threshold in [1, n] is broken by some adversary.  ``where`` filters
    counterexamples; the first matching one in enumeration order wins.
    """
    props = parse_properties(properties)
    summary = summarize(space)
    ts = [t] if t is not None else list(space.thresholds)
    satisfying = [x for x in summary.satisfying(props) if x in ts]
    broken = [x for x in ts if x not in satisfying]
    violated = bool(broken) if t is not None else not satisfying
    cx = None
    if where is not None:
        cx = _first_matching(space, props, broken, where)
        violated = cx is not None
    elif violated:
        at = broken[0]
        prop, w = min(
            ((p, summary.first[(p, at)]) for p in props if (p, at) in summary.first),
            key=lambda pw: pw[1].ordinal,
        )
        cx = materialize(space, prop, at, w)
    return SearchResult(props, t, violated, cx, summary.states_explored, satisfying, broken)


def _first_matching(space, props, ts, where) -> Counterexample | None:
    for ordinal, ev, logs, excluded, counts in _adversaries(space):
        for prop, at, pair in _violations(space, ev, counts, props):
            if at not in ts:
                continue
            w = Witness(ordinal, ev.execution, logs, excluded, pair, counts[pair], _forged(ev, logs, excluded, pair))
            cx = materialize(space, prop, at, w)
            if where(cx):
                return cx
    return None


def emit(result: SearchResult, directory: str | Path) -> Path | None:
    if result.counterexample is None:
        return None
    cx = result.counterexample
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cx.scenario['name']}-{cx.property}-t{cx.t}.json"
    path.write_text(cx.dumps())
    return path


# bounds table


@dataclass(frozen=True)
class BoundCell:
    column: str
    text: str
    per_tau: dict  # tau -> least satisfying t (or None)


def _bound_text(per_tau: dict[int, int | None], for_tau: bool) -> str:
    taus = sorted(per_tau)
    if for_tau:
        ok = [tau for tau in taus if per_tau[tau] is not None]
        if not ok:
            return "impossible"
        # must hold from the least tau upward
        if any(per_tau[tau] is None for tau in taus if tau > ok[0]):
            return "irregular"
        return f"tau>={ok[0]}"
    if any(per_tau[tau] is None for tau in taus):
        return "irregular"
    mins = [per_tau[tau] for tau in taus]
    if len(set(mins)) == 1:
        return f"t>={mins[0]}"
    offsets = {m - tau for tau, m in zip(taus, mins)}
    if len(offsets) == 1:
        c = offsets.pop()
        return f"t>=tau{c:+d}" if c else "t>=tau"
    return "irregular"


def default_table_n(f: int) -> int:
    # room for tau up to 3f+1 with two-round reads (n >= tau + 2f)
    return 5 * f + 1


def minimal_bounds(model: str, f: int, n: int | None = None, taus: Iterable[int] | None = None, cap: int | None = DEFAULT_CAP) -> dict[str, BoundCell]:
    """Least certified t (single properties) or tau (pairs) for one model."""
    n = default_table_n(f) if n is None else n
    taus = list(taus) if taus is not None else list(range(f + 1, n - 2 * f + 1))
    cells = {}
    for col in TABLE_COLUMNS:
        props = parse_properties(col)
        per_tau = {}
        for tau in taus:
            ok = summarize(SearchSpace(n, f, tau, model, cap=cap)).satisfying(props)
            per_tau[tau] = ok[0] if ok else None
        for_tau = len(props) > 1 or col == COMPLETENESS
        cells[col] = BoundCell(col, _bound_text(per_tau, for_tau), per_tau)
    return cells


def expected_table(f: int) -> dict[str, dict[str, str]]:
    """The known bounds instantiated at ``f``."""
    two, three = 2 * f + 1, 3 * f + 1
    fast = {
        COMPLETENESS: f"tau>={two}",
        WEAK_ACCURACY: f"t>={f + 1}",
        f"{COMPLETENESS}+{WEAK_ACCURACY}": f"tau>={three}",
        STRONG_ACCURACY: f"t>=tau+{f}",
        f"{COMPLETENESS}+{STRONG_ACCURACY}": "impossible",
    }
    signed = dict(fast, **{WEAK_ACCURACY: "t>=1", f"{COMPLETENESS}+{WEAK_ACCURACY}": f"tau>={two}"})
    ordered = dict(fast, **{STRONG_ACCURACY: f"t>={f + 1}", f"{COMPLETENESS}+{STRONG_ACCURACY}": f"tau>={three}"})
    ordered_signed = dict(ordered, **{WEAK_ACCURACY: "t>=1", f"{COMPLETENESS}+{WEAK_ACCURACY}": f"tau>={two}"})
    return {
        "baseline": fast,
        "SR": signed,
        "TO": ordered,
        "NF": dict(ordered),
        "TO+SR": ordered_signed,
        "NF+SR": dict(ordered_signed, **{STRONG_ACCURACY: "t>=1", f"{COMPLETENESS}+{STRONG_ACCURACY}": f"tau>={two}"}),
    }


def table1(f: int, n: int | None = None, cap: int | None = DEFAULT_CAP) -> dict[str, dict[str, BoundCell]]:
    return {row: minimal_bounds(model, f, n, cap=cap) for row, model in TABLE_MODELS}


def render_table(table: dict[str, dict[str, BoundCell]], expected: dict[str, dict[str, str]] | None = None) -> str:
    heads = ["model", "completeness", "weak acc.", "compl.+weak", "strong acc.", "compl.+strong"]
    rows = []
    for row, cells in table.items():
        line = [row]
        for col in TABLE_COLUMNS:
            text = cells[col].text
            if expected is not None and expected[row][col] != text:
                text += f" (expected {expected[row][col]})"
            line.append(text)
        rows.append(line)
    widths = [max(len(r[i]) for r in rows + [heads]) for i in range(len(heads))]
    fmt = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()  # noqa: E731
    return "\n".join([fmt(heads), fmt(["-" * w for w in widths])] + [fmt(r) for r in rows])
