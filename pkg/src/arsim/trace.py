"""Execution traces: the ordered event history every verdict is computed from."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Iterator

KINDS = ("invoke", "deliver", "respond", "crash")


@dataclass
class Event:
    ordinal: int
    kind: str
    actor: str
    op: str
    obj: int | None = None
    data: dict[str, Any] = field(default_factory=dict)


@dataclass
class ExecutionTrace:
    """Append-only event list plus a header describing the roster.

    ``meta`` carries what the oracle needs besides events: n, tau and which
    readers are correct.
    """

    meta: dict[str, Any] = field(default_factory=dict)
    events: list[Event] = field(default_factory=list)

    def record(self, kind: str, actor: str, op: str, obj: int | None = None, **data: Any) -> Event:
        if kind not in KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        ev = Event(len(self.events), kind, actor, op, obj, data)
        self.events.append(ev)
        return ev

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def next_ordinal(self) -> int:
        return len(self.events)

    def prefix(self, until: int) -> list[Event]:
        return self.events[:until]

    def history(self) -> list[Event]:
        """Invocation/response projection of high-level operations."""
        return [e for e in self.events if e.obj is None and e.kind in ("invoke", "respond")]

    def to_jsonl(self) -> str:
        lines = [json.dumps({"meta": self.meta}, sort_keys=True)]
        lines += [json.dumps(asdict(e), sort_keys=True) for e in self.events]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "ExecutionTrace":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or "meta" not in rows[0]:
            raise ValueError("trace is missing its meta header")
        trace = cls(meta=rows[0]["meta"])
        for i, row in enumerate(rows[1:]):
            if row["ordinal"] != i:
                raise ValueError(f"event {i} carries ordinal {row['ordinal']}")
            trace.events.append(Event(**row))
        return trace
