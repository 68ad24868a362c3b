"""Deterministic discrete-event core.

Events are ordered by (time, sequence number); ties resolve in scheduling
order, so identical inputs replay identical traces.
"""

from __future__ import annotations

import heapq
from typing import Callable

# Event kinds, recorded for trace inspection.
REQUEST_ARRIVAL = "request-arrival"
STEP_COMPLETE = "step-complete"
TRANSFER_COMPLETE = "transfer-complete"
LIFECYCLE = "lifecycle"
CONTROL_WINDOW = "control-window"
SCALE_PHASE = "scale-phase"


class SimClock:
    """Event queue plus the current simulated time."""

    def __init__(self):
        self.now = 0.0
        self._queue: list[tuple[float, int, str, Callable[[], None]]] = []
        self._seq = 0
        self.events_processed = 0

    def at(self, time: float, kind: str, fn: Callable[[], None]) -> None:
        if time < self.now:
            raise ValueError(f"cannot schedule event in the past ({time} < {self.now})")
        heapq.heappush(self._queue, (time, self._seq, kind, fn))
        self._seq += 1

    def after(self, delay: float, kind: str, fn: Callable[[], None]) -> None:
        self.at(self.now + delay, kind, fn)

    def run(self, until: float | None = None) -> None:
        """Process events in order; stops when the queue empties or `until` passes."""
        while self._queue:
            if until is not None and self._queue[0][0] > until:
                self.now = until
                return
            time, _, _, fn = heapq.heappop(self._queue)
            self.now = time
            self.events_processed += 1
            fn()

    @property
    def pending(self) -> int:
        return len(self._queue)


class Latch:
    """Runs a callback once a fixed number of completions have arrived."""

    def __init__(self, count: int, on_done: Callable[[], None]):
        self._remaining = count
        self._on_done = on_done
        if count == 0:
            on_done()

    def hit(self) -> None:
        self._remaining -= 1
        if self._remaining == 0:
            self._on_done()
        elif self._remaining < 0:
            raise RuntimeError("latch hit more times than its count")
