"""The a-audit algorithm: group collected records and keep those seen by >= t objects."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .base_object import NoResponse, ObjectState, ReadRecord, rw_get_log
from .dispersal import Label
from .tokens import TokenRegistry


class AuditBlocked(RuntimeError):
    """An audit could not gather n - f log responses."""


@dataclass(frozen=True)
class Evidence:
    reader: str
    label: Label
    attesting_objects: frozenset[int]

    @property
    def count(self) -> int:
        return len(self.attesting_objects)

    def line(self) -> str:
        objs = ",".join(str(k) for k in sorted(self.attesting_objects))
        return f"reader={self.reader} label={self.label} objects={objs} count={self.count}"

    def to_json(self) -> dict:
        return {
            "reader": self.reader,
            "label": str(self.label),
            "objects": sorted(self.attesting_objects),
            "count": self.count,
        }


def evidence_key(e: Evidence) -> tuple:
    return (e.reader, e.label.key())


@dataclass(frozen=True)
class AuditReport:
    t: int
    quorum: frozenset[int]
    collected_logs: Mapping[int, frozenset[ReadRecord]]
    evidences: frozenset[Evidence]
    signing: str = "none"
    rejected: frozenset[tuple[int, ReadRecord]] = frozenset()
    invoked_at: int | None = None
    # every accepted record with its attesting objects, before the threshold
    attestations: Mapping[tuple[str, Label], frozenset[int]] = field(default_factory=dict, compare=False)

    def at_threshold(self, t: int) -> "AuditReport":
        """Same collected logs, different t: evidences are re-derived, nothing re-gathered."""
        return AuditReport(
            t,
            self.quorum,
            self.collected_logs,
            frozenset(
                Evidence(r, lab, objs) for (r, lab), objs in self.attestations.items() if len(objs) >= t
            ),
            self.signing,
            self.rejected,
            self.invoked_at,
            self.attestations,
        )

    def evidence_for(self, reader: str, label: Label) -> Evidence | None:
        for e in self.evidences:
            if e.reader == reader and e.label == label:
                return e
        return None

    def records_for(self, reader: str, label: Label) -> int:
        return len(self.attestations.get((reader, label), ()))

    def lines(self) -> list[str]:
        return [e.line() for e in sorted(self.evidences, key=evidence_key)]

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "quorum": sorted(self.quorum),
            "invoked_at": self.invoked_at,
            "evidences": [e.to_json() for e in sorted(self.evidences, key=evidence_key)],
            "collected_logs": {
                str(k): sorted(f"{r.reader}|{r.label}" for r in recs)
                for k, recs in sorted(self.collected_logs.items())
            },
            "rejected": sorted(f"{k}:{r.reader}|{r.label}" for k, r in self.rejected),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def verify_record(
    record: ReadRecord,
    registry: TokenRegistry,
    obj_index: int,
    signing: str = "generic",
) -> bool:
    """Accept a record only if it carries a genuine token its object received.

    Value-specific tokens must also name the recorded label.
    """
    token = record.token
    if token is None or token.reader != record.reader:
        return False
    if not registry.is_minted(token) or token not in registry.received.get(obj_index, ()):
        return False
    if signing == "specific" or not token.generic:
        return token.label == record.label
    return True


def build_report(
    collected_logs: Mapping[int, Iterable[ReadRecord]],
    t: int,
    signing: str = "none",
    registry: TokenRegistry | None = None,
    invoked_at: int | None = None,
) -> AuditReport:
    logs = {k: frozenset(v) for k, v in collected_logs.items()}
    rejected = set()
    usable: dict[int, frozenset[ReadRecord]] = {}
    if signing != "none":
        if registry is None:
            raise ValueError("signed audits need the token registry")
        for k, recs in logs.items():
            keep = set()
            for r in recs:
                if verify_record(r, registry, k, signing):
                    keep.add(r)
                else:
                    rejected.add((k, r))
            usable[k] = frozenset(keep)
    else:
        usable = logs
    # for each distinct record, the set of objects whose log holds it
    distinct = {(r.reader, r.label) for recs in usable.values() for r in recs}
    keyed = {k: {(r.reader, r.label) for r in recs} for k, recs in usable.items()}
    attestations = {
        pair: frozenset(k for k, pairs in keyed.items() if pair in pairs) for pair in distinct
    }
    evidences = frozenset(
        Evidence(r, lab, objs) for (r, lab), objs in attestations.items() if len(objs) >= t
    )
    return AuditReport(
        t,
        frozenset(logs),
        logs,
        evidences,
        signing,
        frozenset(rejected),
        invoked_at,
        attestations,
    )


def a_audit(
    objects: Sequence[ObjectState],
    t: int,
    quorum_size: int,
    quorum: Iterable[int] | None = None,
    signing: str = "none",
    registry: TokenRegistry | None = None,
) -> AuditReport:
    """Untraced audit straight over object states.

    Asks every object for its log and proceeds with the first ``quorum_size``
    answers, in ``quorum`` order if given, else ascending index.
    """
    order = list(quorum) if quorum is not None else [o.index for o in objects]
    by_index = {o.index: o for o in objects}
    logs: dict[int, frozenset[ReadRecord]] = {}
    for k in order:
        if len(logs) == quorum_size:
            break
        try:
            logs[k] = rw_get_log(by_index[k])
        except NoResponse:
            continue
    if len(logs) < quorum_size:
        raise AuditBlocked(f"only {len(logs)} of {quorum_size} logs arrived")
    return build_report(logs, t, signing, registry)
