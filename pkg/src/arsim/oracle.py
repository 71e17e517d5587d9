"""Ground truth over a finished trace: providing sets, effective reads, verdicts.

Everything here reads the event list and its header only.  It never looks at
object state, logs, or anything the audit computed apart from the report it is
asked to judge.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .audit import AuditReport
from .dispersal import Label
from .trace import ExecutionTrace

log = logging.getLogger(__name__)

COMPLETENESS = "completeness"
WEAK_ACCURACY = "weak_accuracy"
WEAK_ACCURACY_PER_VALUE = "weak_accuracy_per_value"
STRONG_ACCURACY = "strong_accuracy"
PROPERTIES = (COMPLETENESS, WEAK_ACCURACY, STRONG_ACCURACY)
ALL_PROPERTIES = PROPERTIES + (WEAK_ACCURACY_PER_VALUE,)

Pair = tuple[str, Label]


class TraceMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ProvidingSet:
    reader: str
    label: Label
    objects: frozenset[int]


@dataclass(frozen=True)
class PropertyVerdict:
    property: str
    holds: bool
    witness: Pair | None = None

    def __post_init__(self) -> None:
        if self.holds == (self.witness is not None):
            raise ValueError("a witness accompanies exactly the failing verdicts")

    def line(self) -> str:
        if self.holds:
            return f"{self.property}: holds"
        reader, label = self.witness
        return f"{self.property}: VIOLATED by reader={reader} label={label}"


def pair_key(pair: Pair) -> tuple:
    return (pair[0], pair[1].key())


@dataclass
class TraceFacts:
    tau: int
    readers: dict[str, bool]
    providing: dict[Pair, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._served = {r for (r, _), objs in self.providing.items() if objs}

    @classmethod
    def from_trace(cls, trace: ExecutionTrace, until: int | None = None, tau: int | None = None) -> "TraceFacts":
        """Scan events with ordinal < ``until`` (all events if None)."""
        tau = trace.meta["tau"] if tau is None else tau
        written: set[tuple[int, str]] = set()
        providing: dict[tuple[str, str], set[int]] = {}
        events = trace.events if until is None else trace.events[:until]
        for ev in events:
            if ev.kind == "deliver" and ev.op == "rw_write":
                written.add((ev.obj, ev.data["label"]))
            elif ev.kind == "respond" and ev.op == "rw_read":
                label = ev.data.get("label")
                if label is not None and (ev.obj, label) in written:
                    providing.setdefault((ev.actor, label), set()).add(ev.obj)
        return cls(
            tau,
            dict(trace.meta.get("readers", {})),
            {(r, Label.parse(lab)): frozenset(objs) for (r, lab), objs in providing.items()},
        )

    def is_correct(self, reader: str) -> bool:
        # readers missing from the roster are treated as correct
        return self.readers.get(reader, True)

    def effective(self) -> list[Pair]:
        return sorted((p for p, objs in self.providing.items() if len(objs) >= self.tau), key=pair_key)

    def offends(self, prop: str, pair: Pair) -> bool:
        """Would reporting ``pair`` break accuracy property ``prop``?"""
        reader = pair[0]
        if not self.is_correct(reader):
            return False
        if prop == WEAK_ACCURACY:
            # the reader obtained no block of any value
            return reader not in self._served
        if prop == WEAK_ACCURACY_PER_VALUE:
            return not self.providing.get(pair)
        if prop == STRONG_ACCURACY:
            return len(self.providing.get(pair, ())) < self.tau
        raise ValueError(f"{prop} is not an accuracy property")


def providing_sets(trace: ExecutionTrace, until: int | None = None) -> set[ProvidingSet]:
    facts = TraceFacts.from_trace(trace, until)
    return {ProvidingSet(r, lab, objs) for (r, lab), objs in facts.providing.items()}


def effective_reads(trace: ExecutionTrace, tau: int, until: int | None = None) -> set[Pair]:
    return set(TraceFacts.from_trace(trace, until, tau).effective())


def _audit_cutoff(trace: ExecutionTrace, report: AuditReport) -> int:
    at = report.invoked_at
    if at is None or not 0 <= at < len(trace.events):
        raise TraceMismatch(f"audit ordinal {at} is not in the trace")
    ev = trace.events[at]
    if ev.kind != "invoke" or ev.op != "a_audit":
        raise TraceMismatch(f"event {at} is {ev.kind} {ev.op}, not an audit invocation")
    return at


def check(prop: str, trace: ExecutionTrace, report: AuditReport, tau: int | None = None) -> PropertyVerdict:
    """Judge one audit report against the history preceding its invocation."""
    facts = TraceFacts.from_trace(trace, _audit_cutoff(trace, report), tau)
    return check_facts(prop, facts, report)


def check_facts(prop: str, facts: TraceFacts, report: AuditReport) -> PropertyVerdict:
    if prop == COMPLETENESS:
        reported = {(e.reader, e.label) for e in report.evidences}
        for pair in facts.effective():
            if pair not in reported:
                return PropertyVerdict(prop, False, pair)
        return PropertyVerdict(prop, True)
    for e in sorted(report.evidences, key=lambda e: (e.reader, e.label.key())):
        pair = (e.reader, e.label)
        if not facts.is_correct(e.reader):
            log.debug("faulty reader %s reported for %s; not an accuracy violation", *pair)
            continue
        if facts.offends(prop, pair):
            return PropertyVerdict(prop, False, pair)
    return PropertyVerdict(prop, True)


def check_all(
    trace: ExecutionTrace,
    report: AuditReport,
    props: Iterable[str] = PROPERTIES,
) -> dict[str, PropertyVerdict]:
    facts = TraceFacts.from_trace(trace, _audit_cutoff(trace, report))
    return {p: check_facts(p, facts, report) for p in props}


@dataclass(frozen=True)
class ThresholdProfile:
    """For which thresholds t one property fails, given per-record attestation counts.

    Evidences at threshold t are exactly the pairs with count >= t, so
    completeness fails for t above the weakest effective read and accuracy
    fails for t up to the strongest offending pair.
    """

    property: str
    counts: tuple[tuple[Pair, int], ...]

    @property
    def is_completeness(self) -> bool:
        return self.property == COMPLETENESS

    def violated(self, t: int) -> bool:
        if self.is_completeness:
            return any(c < t for _, c in self.counts)
        return any(c >= t for _, c in self.counts)

    def witness(self, t: int) -> Pair | None:
        for pair, c in self.counts:
            if (c < t) if self.is_completeness else (c >= t):
                return pair
        return None


def threshold_profiles(
    facts: TraceFacts,
    attestations: Mapping[Pair, Iterable[int]],
    props: Iterable[str] = PROPERTIES,
) -> dict[str, ThresholdProfile]:
    out = {}
    for prop in props:
        if prop == COMPLETENESS:
            rows = [(p, len(attestations.get(p, ()))) for p in facts.effective()]
        else:
            rows = sorted(
                ((p, len(objs)) for p, objs in attestations.items() if objs and facts.offends(prop, p)),
                key=lambda row: pair_key(row[0]),
            )
        out[prop] = ThresholdProfile(prop, tuple(rows))
    return out
