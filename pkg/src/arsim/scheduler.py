"""Deterministic message scheduler.

Messages sit in a priority queue keyed by (due step, late flag, adversary
priority of the target object, post order).  Nothing is random: the scenario
decides when each message lands, and ties break by the adversary's object
order.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

NEVER = None


@dataclass(order=True)
class _Entry:
    key: tuple
    msg: Any = field(compare=False)


class Scheduler:
    def __init__(self, priority: dict[int, int] | None = None) -> None:
        self._heap: list[_Entry] = []
        self._seq = itertools.count()
        self.priority = priority or {}
        self.in_flight: list[Any] = []  # posted but never delivered

    def post(self, msg: Any, obj: int, due: int | None, late: bool = False) -> None:
        if due is NEVER:
            self.in_flight.append(msg)
            return
        key = (due, late, self.priority.get(obj, obj), next(self._seq))
        heapq.heappush(self._heap, _Entry(key, msg))

    def pop_due(self, now: int) -> Iterator[Any]:
        while self._heap and self._heap[0].key[0] <= now:
            yield heapq.heappop(self._heap).msg

    def drop(self, predicate: Callable[[Any], bool]) -> int:
        kept = [e for e in self._heap if not predicate(e.msg)]
        dropped = len(self._heap) - len(kept)
        self._heap = kept
        heapq.heapify(self._heap)
        return dropped

    def pending(self) -> list[Any]:
        return [e.msg for e in sorted(self._heap)] + list(self.in_flight)
