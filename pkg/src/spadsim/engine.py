"""Discrete-event scheduling core.

A minimal priority-queue event loop: events carry an integer-picosecond
timestamp and a kind, the queue pops them in (time, kind, insertion) order,
and a handler may push new events at or after the current time. The
specialized counting kernels bypass this loop for speed; the reference
detector implementation runs on it and serves as the correctness oracle.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import IntEnum

__all__ = ["EngineError", "EventKind", "SimEvent", "EventQueue", "run"]


class EngineError(Exception):
    """Raised on scheduling contract violations (e.g. pushing into the past)."""


class EventKind(IntEnum):
    """Event kinds; the numeric value breaks ties at equal timestamps."""

    TIMER_EXPIRY = 0
    TRAP_RELEASE = 1
    DARK_COUNT = 2
    PHOTON_ARRIVAL = 3


@dataclass(frozen=True)
class SimEvent:
    """One scheduled occurrence. `payload` is opaque to the engine."""

    time: int
    kind: EventKind
    payload: object = None


@dataclass
class EventQueue:
    """Priority queue over SimEvent ordered by (time, kind, insertion)."""

    current_time: int = 0
    _heap: list = field(default_factory=list, repr=False)
    _counter: int = field(default=0, repr=False)

    def push(self, event: SimEvent) -> None:
        if event.time < self.current_time:
            raise EngineError(
                f"cannot schedule {event.kind.name} at t={event.time} ps: "
                f"current time is {self.current_time} ps"
            )
        heapq.heappush(self._heap, (event.time, int(event.kind), self._counter, event))
        self._counter += 1

    def pop(self) -> SimEvent:
        _, _, _, event = heapq.heappop(self._heap)
        self.current_time = event.time
        return event

    def peek(self) -> SimEvent | None:
        return self._heap[0][3] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)


def run(queue: EventQueue, handler, t_end: int) -> int:
    """Drain `queue` through `handler` until empty or the next event is past t_end.

    The first event with time > t_end is left queued. Returns the number of
    events processed.
    """
    processed = 0
    while queue:
        nxt = queue.peek()
        if nxt.time > t_end:
            break
        handler(queue.pop(), queue)
        processed += 1
    return processed
